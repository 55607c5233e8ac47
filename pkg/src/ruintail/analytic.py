"""Closed-form cycle moments and the exponent of the ruin probability.

Over one regime cycle (a sojourn in the starting regime followed by a sojourn
in the other one) the discount factor is ``M = exp(-V_tau2)``. Its moment
generating function factorises as ``f(q) = f0(q) f1(q)`` with

    f_k(q) = lambda_k / (lambda_k + sigma_k**2 q (beta_k - q) / 2),

and the ruin probability decays like ``u**-beta`` where ``beta`` is the unique
root of ``f(q) = 1`` in ``(beta0, beta1)``. Clearing denominators turns that
equation into a cubic, which is what :func:`solve_beta` brackets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import IdentityViolated, PreconditionViolated
from .model import ClaimModel, RegimeParams


@dataclass(frozen=True)
class MgfValue:
    """A moment that is either finite or divergent.

    ``value`` is ``None`` outside the convergence domain; ``float(mv)`` maps
    that case to ``inf`` for callers that just want a number.
    """

    value: Optional[float]

    @property
    def in_domain(self) -> bool:
        return self.value is not None

    def __float__(self) -> float:
        return math.inf if self.value is None else self.value


DIVERGENT = MgfValue(None)


def _exp_time_factor(q: float, lam: float, sigma: float, beta_k: float) -> Optional[float]:
    # lam + E[-q dV/dt] per unit time; positive iff the Exp(lam)-time moment is finite.
    denom = lam + 0.5 * sigma**2 * q * (beta_k - q)
    return denom if denom > 0 else None


def _check_q(q: float) -> None:
    if not q >= 0:
        raise ValueError(f"q must be >= 0, got {q!r}")


def mgf_f0(q: float, regimes: RegimeParams) -> MgfValue:
    """``E exp(-q V_tau1)`` for a sojourn in regime 0."""
    _check_q(q)
    d = _exp_time_factor(q, regimes.lambda01, regimes.sigma0, regimes.beta0)
    return DIVERGENT if d is None else MgfValue(regimes.lambda01 / d)


def mgf_f1(q: float, regimes: RegimeParams) -> MgfValue:
    """``E exp(-q (V_tau2 - V_tau1))`` for a sojourn in regime 1."""
    _check_q(q)
    d = _exp_time_factor(q, regimes.lambda10, regimes.sigma1, regimes.beta1)
    return DIVERGENT if d is None else MgfValue(regimes.lambda10 / d)


def mgf_f(q: float, regimes: RegimeParams) -> MgfValue:
    """``E M**q`` over a full cycle; the same for either starting regime."""
    f0, f1 = mgf_f0(q, regimes), mgf_f1(q, regimes)
    if not (f0.in_domain and f1.in_domain):
        return DIVERGENT
    return MgfValue(f0.value * f1.value)


def cubic_coefficients(regimes: RegimeParams) -> tuple[float, float, float, float]:
    """Coefficients ``(c3, c2, c1, c0)`` of the expanded characteristic cubic."""
    s0, s1 = regimes.sigma0**2, regimes.sigma1**2
    b0, b1 = regimes.beta0, regimes.beta1
    l01, l10 = regimes.lambda01, regimes.lambda10
    s = s0 * s1
    return (
        s,
        -s * (b0 + b1),
        s * b0 * b1 - 2.0 * s0 * l10 - 2.0 * s1 * l01,
        2.0 * s0 * l10 * b0 + 2.0 * s1 * l01 * b1,
    )


def cubic(q: float, regimes: RegimeParams) -> float:
    """``s0 s1 q (b0-q)(b1-q) + 2 s0 (b0-q) l10 + 2 s1 (b1-q) l01`` in Horner form."""
    c3, c2, c1, c0 = cubic_coefficients(regimes)
    return ((c3 * q + c2) * q + c1) * q + c0


@dataclass(frozen=True)
class BetaSolution:
    beta: float
    residual_f: float
    residual_cubic: float
    bracket: tuple[float, float]
    iterations: int


def brent_root(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-14,
    maxiter: int = 200,
) -> tuple[float, tuple[float, float], int]:
    """Brent's method on a sign-change bracket.

    Inverse quadratic interpolation or secant steps, falling back to bisection
    whenever the interpolated step is not safely inside the bracket.

    Returns:
        ``(root, (lo, hi), iterations)`` with the final bracket still
        straddling the sign change.
    """
    a, b = lo, hi
    fa, fb = func(a), func(b)
    if fa == 0.0:
        return a, (a, a), 0
    if fb == 0.0:
        return b, (b, b), 0
    if (fa > 0) == (fb > 0):
        raise ValueError("endpoints do not bracket a sign change")
    c, fc = a, fa
    d = e = b - a
    eps = 2.220446049250313e-16
    for it in range(1, maxiter + 1):
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol = 2.0 * eps * abs(b) + 0.5 * xtol
        m = 0.5 * (c - b)
        if abs(m) <= tol or fb == 0.0:
            return b, (min(b, c), max(b, c)), it
        if abs(e) >= tol and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                qq = 1.0 - s
            else:
                qq = fa / fc
                r = fb / fc
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0))
                qq = (qq - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                qq = -qq
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * qq - abs(tol * qq), abs(e * qq)):
                e, d = d, p / qq
            else:
                d = e = m
        else:
            d = e = m
        a, fa = b, fb
        if abs(d) > tol:
            b += d
        else:
            b += tol if m > 0 else -tol
        fb = func(b)
    raise RuntimeError(f"brent_root did not converge in {maxiter} iterations")


def solve_beta(regimes: RegimeParams) -> BetaSolution:
    """Unique root of ``f(q) = 1`` in ``(beta0, beta1)``, found on the cubic.

    The cubic is positive at ``beta0`` and negative at ``beta1`` whatever the
    parameters, so the bracket is guaranteed; ``f`` itself may have a pole
    inside the interval and is only evaluated at the root as a check.

    Raises:
        PreconditionViolated: unless ``0 < beta0 < beta1`` (canonical labels).
    """
    b0, b1 = regimes.beta0, regimes.beta1
    if not b0 > 0:
        raise PreconditionViolated(
            f"beta0 = {b0!r} <= 0: the power-law regime does not apply "
            "(with non-positive exponent ruin is certain for constant-parameter gBm)"
        )
    if not b0 < b1:
        raise PreconditionViolated(
            f"need beta0 < beta1, got beta0 = {b0!r}, beta1 = {b1!r}; canonicalize first"
        )

    def g(q: float) -> float:
        return cubic(q, regimes)

    delta = 1e-12 * (b1 - b0)
    lo, hi = b0 + delta, b1 - delta
    if not (g(lo) > 0 > g(hi)):
        lo, hi = b0, b1
    root, bracket, iterations = brent_root(g, lo, hi, xtol=1e-14)

    fval = mgf_f(root, regimes)
    residual_f = abs(fval.value - 1.0) if fval.in_domain else math.inf
    return BetaSolution(
        beta=root,
        residual_f=residual_f,
        residual_cubic=abs(g(root)),
        bracket=bracket,
        iterations=iterations,
    )


@dataclass(frozen=True)
class PositivityReport:
    lhs0: float
    rhs0: float
    lhs1: float
    rhs1: float


def check_positivity_identities(beta: float, regimes: RegimeParams, rtol: float = 1e-9) -> PositivityReport:
    """Check the two identities that make both sojourn moments finite at the root.

    At a root of the cubic,

        s0 beta (b0-beta)/2 + l01 = -s0 (b0-beta) / (s1 (b1-beta)) * l10 > 0

    and symmetrically with the regime labels exchanged.

    Raises:
        IdentityViolated: if either side is non-positive or the two sides
            differ by more than ``rtol`` relative.
    """
    s0, s1 = regimes.sigma0**2, regimes.sigma1**2
    b0, b1 = regimes.beta0, regimes.beta1
    l01, l10 = regimes.lambda01, regimes.lambda10
    d0, d1 = b0 - beta, b1 - beta
    if d0 == 0.0 or d1 == 0.0:
        raise IdentityViolated(f"beta = {beta!r} sits on a regime exponent; not a root")
    lhs0 = 0.5 * s0 * beta * d0 + l01
    rhs0 = -s0 * d0 / (s1 * d1) * l10
    lhs1 = 0.5 * s1 * beta * d1 + l10
    rhs1 = -s1 * d1 / (s0 * d0) * l01
    for name, lhs, rhs in (("regime 0", lhs0, rhs0), ("regime 1", lhs1, rhs1)):
        if not (lhs > 0 and rhs > 0):
            raise IdentityViolated(f"{name}: sides not positive ({lhs!r}, {rhs!r})")
        if abs(lhs - rhs) > rtol * max(abs(lhs), abs(rhs)):
            raise IdentityViolated(f"{name}: {lhs!r} != {rhs!r}")
    return PositivityReport(lhs0, rhs0, lhs1, rhs1)


@dataclass(frozen=True)
class MomentCondition:
    finite: bool
    value: Optional[float]


def moment_condition(claims: ClaimModel, beta: float) -> MomentCondition:
    """``Pi(|x|**beta) = alpha1 E_F1 |x|**beta + alpha2 E_F2 |x|**beta``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    total = 0.0
    for rate, dist in ((claims.alpha1, claims.F1), (claims.alpha2, claims.F2)):
        if rate == 0:
            continue
        m = dist.moment(beta)
        if m is None:
            return MomentCondition(False, None)
        total += rate * m
    return MomentCondition(True, total)


def expected_discount_integral(q: float, regimes: RegimeParams, start_regime: int = 0) -> MgfValue:
    """``E int_0^tau2 exp(-q V_s) ds`` over one cycle.

    By Fubini each sojourn contributes ``1 / (lambda + sigma**2 q (beta - q)/2)``
    and the second one is discounted by the first sojourn's moment.
    """
    _check_q(q)
    first = (regimes.lambda01, regimes.sigma0, regimes.beta0)
    second = (regimes.lambda10, regimes.sigma1, regimes.beta1)
    if start_regime == 1:
        first, second = second, first
    d_first = _exp_time_factor(q, *first)
    d_second = _exp_time_factor(q, *second)
    if d_first is None or d_second is None:
        return DIVERGENT
    f_first = first[0] / d_first
    return MgfValue(1.0 / d_first + f_first / d_second)

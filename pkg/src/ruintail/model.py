"""Model parameters and the audit of the standing assumptions.

The reserve is invested in an asset whose drift and volatility switch between
two regimes according to a telegraph signal. Business activity is a premium
stream ``c t`` plus two independent compound Poisson streams: downward jumps
(claims) at rate ``alpha1`` with magnitudes from ``F1`` and upward jumps
(annuity-type gains) at rate ``alpha2`` with magnitudes from ``F2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numba as nb
import numpy as np

from .errors import DegenerateRegimes
from .rng import RngStream, next_normal, next_uniform

# Family codes understood by the jitted samplers.
EXPONENTIAL, PARETO, CONSTANT, LOGNORMAL = 0, 1, 2, 3


def _require_positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        _require_positive("rate", self.rate)

    def moment(self, beta: float) -> Optional[float]:
        return math.gamma(beta + 1.0) / self.rate**beta

    def kernel_params(self) -> tuple[int, float, float]:
        return EXPONENTIAL, float(self.rate), 0.0


@dataclass(frozen=True)
class Pareto:
    """Classical Pareto law on ``[scale, inf)`` with tail ``(scale/x)**shape``."""

    scale: float
    shape: float

    def __post_init__(self):
        _require_positive("scale", self.scale)
        _require_positive("shape", self.shape)

    def moment(self, beta: float) -> Optional[float]:
        if beta >= self.shape:
            return None
        return self.shape * self.scale**beta / (self.shape - beta)

    def kernel_params(self) -> tuple[int, float, float]:
        return PARETO, float(self.scale), float(self.shape)


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        _require_positive("value", self.value)

    def moment(self, beta: float) -> Optional[float]:
        return self.value**beta

    def kernel_params(self) -> tuple[int, float, float]:
        return CONSTANT, float(self.value), 0.0


@dataclass(frozen=True)
class LogNormal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu!r}")
        _require_positive("sigma", self.sigma)

    def moment(self, beta: float) -> Optional[float]:
        return math.exp(beta * self.mu + 0.5 * beta**2 * self.sigma**2)

    def kernel_params(self) -> tuple[int, float, float]:
        return LOGNORMAL, float(self.mu), float(self.sigma)


ClaimDist = Union[Exponential, Pareto, Constant, LogNormal]


@nb.njit(cache=True)
def draw_magnitude(state, gauss, family, p1, p2):
    if family == EXPONENTIAL:
        return -math.log(1.0 - next_uniform(state)) / p1
    if family == PARETO:
        return p1 * (1.0 - next_uniform(state)) ** (-1.0 / p2)
    if family == CONSTANT:
        return p1
    return math.exp(p1 + p2 * next_normal(state, gauss))


@nb.njit(cache=True)
def _draw_many(state, gauss, family, p1, p2, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = draw_magnitude(state, gauss, family, p1, p2)
    return out


def sample_magnitudes(dist: ClaimDist, rng: RngStream, n: int) -> np.ndarray:
    """Draw ``n`` jump magnitudes with the same sampler the simulator uses."""
    family, p1, p2 = dist.kernel_params()
    return _draw_many(rng.state, rng.gauss, family, p1, p2, int(n))


@dataclass(frozen=True)
class RegimeParams:
    """Drift ``a``, volatility ``sigma`` and leaving intensity of each regime.

    ``lambda01`` is the intensity of switching 0 -> 1 and ``lambda10`` of 1 -> 0.
    """

    a0: float
    a1: float
    sigma0: float
    sigma1: float
    lambda01: float
    lambda10: float

    def __post_init__(self):
        for name in ("a0", "a1", "sigma0", "sigma1", "lambda01", "lambda10"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def beta0(self) -> float:
        return 2.0 * self.a0 / self.sigma0**2 - 1.0

    @property
    def beta1(self) -> float:
        return 2.0 * self.a1 / self.sigma1**2 - 1.0

    def swapped(self) -> "RegimeParams":
        return RegimeParams(
            a0=self.a1,
            a1=self.a0,
            sigma0=self.sigma1,
            sigma1=self.sigma0,
            lambda01=self.lambda10,
            lambda10=self.lambda01,
        )


@dataclass(frozen=True)
class ClaimModel:
    """Premium rate ``c`` (any sign) and the two-sided jump structure."""

    c: float
    alpha1: float = 0.0
    alpha2: float = 0.0
    F1: Optional[ClaimDist] = None
    F2: Optional[ClaimDist] = None

    def __post_init__(self):
        if not math.isfinite(self.c):
            raise ValueError("c must be finite")
        for name, rate, dist in (("F1", self.alpha1, self.F1), ("F2", self.alpha2, self.F2)):
            if not (rate >= 0 and math.isfinite(rate)):
                raise ValueError(f"jump intensity for {name} must be >= 0, got {rate!r}")
            if rate > 0 and dist is None:
                raise ValueError(f"{name} is required when its intensity is positive")

    @property
    def mean_jump_rate(self) -> float:
        """Drift contributed by the jumps, ``int x Pi(dx)``."""
        total = 0.0
        if self.alpha1 > 0:
            total -= self.alpha1 * self.F1.moment(1.0)
        if self.alpha2 > 0:
            m = self.F2.moment(1.0)
            total += math.inf if m is None else self.alpha2 * m
        return total


@dataclass(frozen=True)
class ModelSpec:
    regimes: RegimeParams
    claims: ClaimModel
    initial_regime: int = 0

    def __post_init__(self):
        if self.initial_regime not in (0, 1):
            raise ValueError(f"initial_regime must be 0 or 1, got {self.initial_regime!r}")

    def with_initial_regime(self, i: int) -> "ModelSpec":
        return replace(self, initial_regime=i)


def canonicalize(regimes: RegimeParams) -> tuple[RegimeParams, bool]:
    """Relabel regimes so that ``beta0 < beta1``.

    Returns the (possibly relabelled) parameters and whether labels were
    exchanged; callers translate user-facing regime indices with ``1 - i``
    when the flag is set.

    Raises:
        DegenerateRegimes: if ``beta0 == beta1`` exactly.
    """
    b0, b1 = regimes.beta0, regimes.beta1
    if b0 == b1:
        raise DegenerateRegimes(b0)
    if b0 > b1:
        return regimes.swapped(), True
    return regimes, False


@dataclass(frozen=True)
class CheckItem:
    name: str
    status: str  # "pass", "fail" or "pending"
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    items: tuple[CheckItem, ...]
    beta0: float
    beta1: float
    swapped: bool = False

    @property
    def ok(self) -> bool:
        return all(item.status != "fail" for item in self.items)

    @property
    def failures(self) -> list[CheckItem]:
        return [item for item in self.items if item.status == "fail"]

    def __getitem__(self, name: str) -> CheckItem:
        for item in self.items:
            if item.name == name:
                return item
        raise KeyError(name)


def validate_model(spec: ModelSpec, beta: Optional[float] = None) -> ValidationReport:
    """Audit the standing assumptions of the power-law ruin result.

    Never raises on an invalid model; every assumption is reported as
    ``pass``/``fail``. The moment condition on the jump measure depends on the
    exponent and is reported ``pending`` unless ``beta`` is supplied.
    """
    r, cl = spec.regimes, spec.claims
    items = []

    positive = {
        "sigma0": r.sigma0,
        "sigma1": r.sigma1,
        "lambda01": r.lambda01,
        "lambda10": r.lambda10,
    }
    bad = [k for k, v in positive.items() if not v > 0]
    items.append(CheckItem("positive rates and volatilities", "fail" if bad else "pass",
                           ", ".join(f"{k} <= 0" for k in bad)))

    if bad:
        b0 = b1 = math.nan
        swapped = False
        items.append(CheckItem("beta0 > 0", "fail", "undefined without positive volatilities"))
        items.append(CheckItem("beta0 < beta1", "fail", "undefined without positive volatilities"))
    else:
        lo, hi = sorted((r.beta0, r.beta1))
        b0, b1 = lo, hi
        swapped = r.beta0 > r.beta1
        items.append(CheckItem("beta0 > 0", "pass" if b0 > 0 else "fail", f"beta0 = {b0!r}"))
        items.append(CheckItem("beta0 < beta1", "pass" if b0 < b1 else "fail",
                               f"beta0 = {b0!r}, beta1 = {b1!r}"))

    increasing = cl.c >= 0 and cl.alpha1 == 0
    items.append(CheckItem("P not increasing", "fail" if increasing else "pass",
                           "c >= 0 with no downward jumps makes ruin impossible" if increasing else ""))

    if beta is None:
        items.append(CheckItem("moment condition", "pending", "requires the exponent"))
    else:
        # local import: analytic depends on this module
        from .analytic import moment_condition

        mc = moment_condition(cl, beta)
        items.append(CheckItem("moment condition", "pass" if mc.finite else "fail",
                               f"Pi(|x|^beta) = {mc.value!r}" if mc.finite else "Pi(|x|^beta) = inf"))

    return ValidationReport(items=tuple(items), beta0=b0, beta1=b1, swapped=swapped)


REFERENCE_REGIMES = RegimeParams(a0=1.0, a1=2.0, sigma0=1.0, sigma1=1.0, lambda01=1.0, lambda10=1.0)
REFERENCE_CLAIMS = ClaimModel(c=1.2, alpha1=1.0, alpha2=0.0, F1=Exponential(1.0))


def reference_model(initial_regime: int = 0) -> ModelSpec:
    """The worked example used throughout the tests and demos (beta ~ 1.64)."""
    return ModelSpec(REFERENCE_REGIMES, REFERENCE_CLAIMS, initial_regime)

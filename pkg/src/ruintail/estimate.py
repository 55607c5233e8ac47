"""Empirical tails, tail-index fits, ruin estimates and the Kesten hypotheses.

All binomial proportions get 95% Wilson score intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import EmptyInput, InsufficientPositiveSamples, InsufficientTailPoints
from .model import ModelSpec
from .pathsim import CycleBatch, PathBatch, SimConfig, simulate_cycles, simulate_paths

Z95 = float(stats.norm.ppf(0.975))


def wilson_interval(k, n, z: float = Z95):
    """Wilson score interval for ``k`` successes out of ``n`` (vectorised)."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    p = k / n
    denom = 1.0 + z**2 / n
    centre = (p + z**2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return np.clip(centre - half, 0.0, 1.0), np.clip(centre + half, 0.0, 1.0)


@dataclass(frozen=True)
class EmpiricalTail:
    u_grid: np.ndarray
    g_bar: np.ndarray
    n: int
    ci_lo: np.ndarray
    ci_hi: np.ndarray

    @property
    def ci_half_width(self) -> np.ndarray:
        return 0.5 * (self.ci_hi - self.ci_lo)

    @property
    def counts(self) -> np.ndarray:
        return np.rint(self.g_bar * self.n).astype(np.int64)


def empirical_tail(samples, u_grid) -> EmpiricalTail:
    """Fraction of samples strictly above each ``u``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise EmptyInput("no samples")
    u = np.asarray(u_grid, dtype=float)
    if u.size and np.any(np.diff(u) < 0):
        raise ValueError("u_grid must be ascending")
    exceed = x.size - np.searchsorted(x, u, side="right")
    lo, hi = wilson_interval(exceed, x.size)
    return EmpiricalTail(u, exceed / x.size, x.size, lo, hi)


def default_u_grid(samples, per_decade: int = 20, lo_q: float = 0.5, hi_q: float = 0.9999) -> np.ndarray:
    """Geometric grid between two sample quantiles.

    When the lower quantile is not positive (the perpetuity often has a
    negative median) the grid starts at the median of the positive samples.
    """
    x = np.asarray(samples, dtype=float)
    lo, hi = np.quantile(x, [lo_q, hi_q])
    if lo <= 0:
        pos = x[x > 0]
        if pos.size == 0:
            raise InsufficientPositiveSamples("no positive samples to build a u-grid")
        lo = float(np.median(pos))
    if not hi > lo:
        raise InsufficientTailPoints("upper quantile does not exceed lower quantile")
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


def hill_estimate(samples, k: int) -> float:
    """Hill estimate of the tail index from the ``k`` largest positive samples.

    The reciprocal of the mean of ``log(X_(i) / X_(k+1))``, ``i = 1..k``.
    """
    x = np.asarray(samples, dtype=float)
    x = x[x > 0]
    k = int(k)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k >= x.size:
        raise InsufficientPositiveSamples(f"k = {k} needs more than {x.size} positive samples")
    top = -np.partition(-x, k)[: k + 1]
    top.sort()
    threshold = top[0]
    mean_log = float(np.mean(np.log(top[1:] / threshold)))
    if not mean_log > 0:
        raise InsufficientPositiveSamples("zero log-spacings in the upper order statistics")
    return 1.0 / mean_log


def default_hill_k(n: int) -> int:
    return int(math.floor(n ** (2.0 / 3.0)))


def hill_sweep(samples, n: Optional[int] = None) -> dict[str, float]:
    """Hill estimates at ``k = n**0.5, n**(2/3), n**0.8`` for a sensitivity audit."""
    x = np.asarray(samples, dtype=float)
    n = x.size if n is None else n
    n_pos = int(np.count_nonzero(x > 0))
    out = {}
    for label, power in (("n^1/2", 0.5), ("n^2/3", 2.0 / 3.0), ("n^0.8", 0.8)):
        k = min(int(math.floor(n**power)), n_pos - 1)
        out[label] = hill_estimate(x, k) if k >= 2 else math.nan
    return out


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float
    n_points: int
    slope_drift: float  # change of the local log-log slope across the window

    @property
    def curved(self) -> bool:
        """True when the local slope drifts by more than a quarter of the fitted slope."""
        return abs(self.slope_drift) > 0.25 * abs(self.slope)


def loglog_fit(tail: EmpiricalTail, u_min_quantile: float = 0.99) -> LogLogFit:
    """Least squares of ``log g_bar`` on ``log u`` above the ``u_min_quantile`` cut.

    Points enter the fit when ``g_bar <= 1 - u_min_quantile`` and ``g_bar > 0``.
    A quadratic term fitted on the same points measures curvature.
    """
    keep = (tail.g_bar > 0) & (tail.g_bar <= 1.0 - u_min_quantile) & (tail.u_grid > 0)
    if np.count_nonzero(keep) < 5:
        raise InsufficientTailPoints(f"only {np.count_nonzero(keep)} usable grid points (need 5)")
    lx = np.log(tail.u_grid[keep])
    ly = np.log(tail.g_bar[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    c2 = np.polyfit(lx, ly, 2)[0]
    drift = 2.0 * c2 * (lx.max() - lx.min())
    return LogLogFit(float(slope), float(intercept), r2, int(lx.size), float(drift))


@dataclass(frozen=True)
class Plateau:
    u: np.ndarray
    values: np.ndarray
    stable: bool

    @property
    def level(self) -> float:
        """Geometric mean of the plateau, the estimate of the Goldie constant."""
        if self.values.size == 0 or np.any(self.values <= 0):
            return 0.0
        return float(np.exp(np.mean(np.log(self.values))))

    @property
    def spread(self) -> float:
        if self.values.size == 0 or self.values.min() <= 0:
            return math.inf
        return float(self.values.max() / self.values.min())


def c_plus_plateau(tail: EmpiricalTail, beta: float) -> Plateau:
    """``u**beta * g_bar(u)`` over the top decade of ``u`` with nonzero counts.

    Stable when every value is positive and max/min stays within a factor 2.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    nz = tail.g_bar > 0
    if not np.any(nz):
        return Plateau(np.empty(0), np.empty(0), False)
    u_top = tail.u_grid[nz].max()
    sel = nz & (tail.u_grid >= u_top / 10.0) & (tail.u_grid > 0)
    u = tail.u_grid[sel]
    vals = u**beta * tail.g_bar[sel]
    stable = bool(vals.size >= 2 and np.all(vals > 0) and vals.max() / vals.min() <= 2.0)
    return Plateau(u, vals, stable)


@dataclass(frozen=True)
class TailReport:
    beta_analytic: float
    beta_hat_hill: float
    beta_hat_ols: float
    k_used: int
    hill_sweep: dict
    ols: LogLogFit
    tail: EmpiricalTail
    plateau: Plateau
    negative_plateau: Optional[Plateau] = None  # None: negative tail not estimable

    @property
    def c_plus_plateau(self) -> np.ndarray:
        return self.plateau.values


def tail_report(
    samples,
    beta: float,
    u_grid: Optional[Sequence[float]] = None,
    k: Optional[int] = None,
    u_min_quantile: float = 0.99,
) -> TailReport:
    """Fit the upper tail of perpetuity samples and compare with ``beta``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptyInput("no samples")
    grid = default_u_grid(x) if u_grid is None else np.asarray(u_grid, dtype=float)
    tail = empirical_tail(x, grid)
    n_pos = int(np.count_nonzero(x > 0))
    k_used = min(default_hill_k(x.size), n_pos - 1) if k is None else int(k)
    hill = hill_estimate(x, k_used)
    ols = loglog_fit(tail, u_min_quantile)
    plateau = c_plus_plateau(tail, beta)

    negative = None
    neg = -x[x < 0]
    if neg.size >= 100:
        neg_grid = np.geomspace(*np.quantile(neg, [0.5, 0.9999]), num=len(grid))
        neg_tail = empirical_tail(-x, neg_grid)
        cand = c_plus_plateau(neg_tail, beta)
        if cand.values.size and np.all(cand.values > 0):
            negative = cand
    return TailReport(
        beta_analytic=beta,
        beta_hat_hill=hill,
        beta_hat_ols=-ols.slope,
        k_used=k_used,
        hill_sweep=hill_sweep(x),
        ols=ols,
        tail=tail,
        plateau=plateau,
        negative_plateau=negative,
    )


# ---------------------------------------------------------------------------
# ruin probabilities


@dataclass(frozen=True)
class RuinEstimate:
    """Per-regime arrays over ``u_grid``; the sandwich uses both regimes' tails."""

    u_grid: np.ndarray
    n_paths: dict
    psi_hat: dict
    ci_lo: dict
    ci_hi: dict
    truncation_bias_bound: dict
    g_bar: dict
    g_ci_lo: dict
    g_ci_hi: dict
    g0: tuple  # (G_0(0), G_1(0))
    g0_ci_lo: tuple

    def sandwich_low(self, i: int) -> np.ndarray:
        return self.g_bar[i]

    def sandwich_high(self, i: int) -> np.ndarray:
        return self.g_bar[i] / min(self.g0)

    def sandwich_holds(self, i: int) -> np.ndarray:
        """Per-u check of both sandwich inequalities, each widened by the CIs involved."""
        lower_ok = self.ci_hi[i] >= self.g_ci_lo[i]
        upper_ok = self.ci_lo[i] <= self.g_ci_hi[i] / min(self.g0_ci_lo)
        return lower_ok & upper_ok


def ruin_from_batches(batches: dict, u_grid: Sequence[float]) -> RuinEstimate:
    """Ruin estimates from simulated paths of both initial regimes.

    ``batches`` maps the initial regime to its :class:`PathBatch`; both 0 and
    1 must be present because the upper bound involves ``G_0(0)`` and ``G_1(0)``.
    """
    if set(batches) != {0, 1}:
        raise ValueError("need path batches for both initial regimes")
    u = np.asarray(sorted(u_grid), dtype=float)
    out = {name: {} for name in ("n", "psi", "lo", "hi", "trunc", "g", "glo", "ghi")}
    g0, g0_lo = [], []
    for i in (0, 1):
        b: PathBatch = batches[i]
        n = b.n_paths
        ruined = (b.y_sup[:, None] >= u[None, :]).sum(axis=0)
        lo, hi = wilson_interval(ruined, n)
        tail = empirical_tail(b.y_inf, u)
        out["n"][i] = n
        out["psi"][i] = ruined / n
        out["lo"][i] = lo
        out["hi"][i] = hi
        out["trunc"][i] = np.full(u.shape, float(np.mean(b.truncation_bound)))
        out["g"][i] = tail.g_bar
        out["glo"][i] = tail.ci_lo
        out["ghi"][i] = tail.ci_hi
        k0 = int(np.count_nonzero(b.y_inf > 0))
        g0.append(k0 / n)
        g0_lo.append(float(wilson_interval(k0, n)[0]))
    return RuinEstimate(u, out["n"], out["psi"], out["lo"], out["hi"], out["trunc"], out["g"],
                        out["glo"], out["ghi"], tuple(g0), tuple(g0_lo))


def estimate_ruin(spec: ModelSpec, config: SimConfig, u_grid: Sequence[float]) -> RuinEstimate:
    """Simulate both initial regimes on their own streams and estimate ruin."""
    batches = {i: simulate_paths(spec.with_initial_regime(i), config, u_grid) for i in (0, 1)}
    return ruin_from_batches(batches, u_grid)


# ---------------------------------------------------------------------------
# Kesten-Goldie hypotheses


@dataclass(frozen=True)
class DoublingCheck:
    half: float
    full: float

    @property
    def rel_change(self) -> float:
        if self.half == 0:
            return math.inf if self.full != 0 else 0.0
        return abs(self.full / self.half - 1.0)

    def stable(self, tol: float = 0.05) -> bool:
        return bool(np.isfinite(self.full) and self.rel_change < tol)


@dataclass(frozen=True)
class KestenReport:
    beta: float
    n_cycles: int
    m_beta_mean: float
    m_beta_se: float
    m_beta_log: DoublingCheck
    q_beta: DoublingCheck
    non_arithmetic: str = "ln M has a Gaussian component, so its law is non-arithmetic"

    @property
    def m_beta_z(self) -> float:
        return (self.m_beta_mean - 1.0) / self.m_beta_se

    def m_beta_ok(self, n_se: float = 4.0) -> bool:
        return abs(self.m_beta_mean - 1.0) <= n_se * self.m_beta_se


def _doubling(values: np.ndarray) -> DoublingCheck:
    half = values[: values.size // 2]
    return DoublingCheck(float(half.mean()), float(values.mean()))


def kesten_from_cycles(cycles: CycleBatch, beta: float) -> KestenReport:
    m, q = cycles.m, cycles.q
    mb = m**beta
    log_m = np.log(m)
    return KestenReport(
        beta=beta,
        n_cycles=len(cycles),
        m_beta_mean=float(mb.mean()),
        m_beta_se=float(mb.std(ddof=1) / math.sqrt(mb.size)),
        m_beta_log=_doubling(mb * np.maximum(log_m, 0.0)),
        q_beta=_doubling(np.abs(q) ** beta),
    )


def kesten_conditions_report(spec: ModelSpec, config: SimConfig, beta: float, n_cycles: int = 10**6) -> KestenReport:
    """Monte Carlo audit of ``E M^beta = 1``, ``E M^beta (ln M)^+ < inf`` and ``E|Q|^beta < inf``.

    Finiteness is judged by stability of the sample mean when the sample is
    doubled (first half against the whole).
    """
    return kesten_from_cycles(simulate_cycles(spec, config, n_cycles), beta)

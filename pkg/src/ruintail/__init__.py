"""Power-law ruin exponent for a reserve invested in a regime-switching asset.

The exponent ``beta`` comes from a closed-form characteristic equation
(:mod:`ruintail.analytic`); the Monte Carlo side (:mod:`ruintail.pathsim`,
:mod:`ruintail.estimate`) checks the tail and ruin asymptotics it predicts.
"""

__version__ = "0.1.0"

from .analytic import (
    BetaSolution,
    MgfValue,
    check_positivity_identities,
    cubic,
    cubic_coefficients,
    expected_discount_integral,
    mgf_f,
    mgf_f0,
    mgf_f1,
    moment_condition,
    solve_beta,
)
from .errors import (
    ConfigError,
    DegenerateRegimes,
    IdentityViolated,
    InsufficientPositiveSamples,
    InsufficientTailPoints,
    PreconditionViolated,
    RuinTailError,
    TailEstimationError,
)
from .estimate import (
    EmpiricalTail,
    RuinEstimate,
    TailReport,
    empirical_tail,
    estimate_ruin,
    hill_estimate,
    kesten_conditions_report,
    tail_report,
)
from .model import (
    ClaimModel,
    Constant,
    Exponential,
    LogNormal,
    ModelSpec,
    Pareto,
    RegimeParams,
    canonicalize,
    reference_model,
    validate_model,
)
from .pathsim import SimConfig, sample_cycle, sample_y_infinity, simulate_cycles, simulate_paths

__all__ = [name for name in dir() if not name.startswith("_")]

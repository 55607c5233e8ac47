"""Exception hierarchy shared across the package."""


class RuinTailError(Exception):
    """Base class for all package errors."""


class PreconditionViolated(RuinTailError, ValueError):
    """The model lies outside the region where the power-law result applies."""


class DegenerateRegimes(PreconditionViolated):
    """Both regimes share the same exponent, so the model is a constant-parameter gBm.

    Attributes:
        exponent: the collapse exponent ``2a/sigma**2 - 1`` of the single gBm.
    """

    def __init__(self, exponent: float):
        self.exponent = exponent
        super().__init__(
            f"regimes have equal exponents; the model collapses to a constant-parameter "
            f"gBm with ruin exponent 2a/sigma^2 - 1 = {exponent!r}"
        )


class IdentityViolated(RuinTailError, ArithmeticError):
    """A closed-form identity that must hold at the root failed to hold."""


class TailEstimationError(RuinTailError, ValueError):
    """Base class for failures of the empirical tail estimators."""


class EmptyInput(TailEstimationError):
    pass


class InsufficientPositiveSamples(TailEstimationError):
    pass


class InsufficientTailPoints(TailEstimationError):
    pass


class ConfigError(RuinTailError, ValueError):
    """Malformed or inconsistent run configuration."""

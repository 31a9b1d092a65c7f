"""Exception hierarchy."""


class RVLabError(Exception):
    """Base class for all library errors."""


class IncompatibleVariant(RVLabError, TypeError):
    pass


class NonpositiveScale(RVLabError, ValueError):
    pass


class InvalidElement(RVLabError, ValueError):
    pass


class NonMonotoneOracle(RVLabError):
    pass


class InvalidInterval(RVLabError, ValueError):
    pass


class TrivialPushforward(RVLabError):
    pass


class TrivialResult(RVLabError):
    pass


class NonMorphism(RVLabError):
    pass


class DimensionMismatch(RVLabError, ValueError):
    pass


class BadParameters(RVLabError, ValueError):
    pass


class ZeroModulus(RVLabError, ValueError):
    pass


class InfiniteModulus(RVLabError, ValueError):
    pass


class DegeneratePolytope(RVLabError, ValueError):
    pass


class BadNormingRule(RVLabError, ValueError):
    pass


class StatisticalPreconditionError(RVLabError):
    """Raised when the data cannot support the requested statistic."""


class InsufficientData(StatisticalPreconditionError):
    pass


class InsufficientExceedances(StatisticalPreconditionError):
    pass


class MomentDiagnosticFailed(UserWarning):
    """Warning: the empirical moment proxy grows along the probed covariates."""


class ConfigError(RVLabError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key

"""Exception types shared across the package."""


class PPIError(Exception):
    """Base class for estimation errors."""


class DegenerateDenominator(PPIError):
    """A ratio estimand has (weighted) zero mass in its denominator."""


class LengthMismatch(PPIError, ValueError):
    pass


class InvalidLevel(PPIError, ValueError):
    pass


class InvalidInput(PPIError, ValueError):
    pass


class AllLabeled(PPIError):
    pass


class NoneLabeled(PPIError):
    pass


class OverlapViolation(PPIError, ValueError):
    """Labeling probabilities fall outside ``[eps, 1 - eps]``."""


class Separation(PPIError):
    """Logistic MLE does not exist (coefficients diverge)."""


class NotConverged(PPIError):
    pass


class UnsupportedTarget(PPIError, ValueError):
    pass


class NotPositiveDefinite(PPIError, ValueError):
    pass


class SchemaMismatch(PPIError, ValueError):
    pass


class MissingColumn(SchemaMismatch):
    pass

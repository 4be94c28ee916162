"""Exception types shared across the package."""


class OsgoodSheError(Exception):
    """Base class for all package errors."""


class DomainError(OsgoodSheError, ValueError):
    pass


class NonPositiveH(OsgoodSheError, ValueError):
    pass


class LogDomainError(OsgoodSheError, ValueError):
    pass


class DivergentIntegral(OsgoodSheError, ArithmeticError):
    pass


class DimensionError(OsgoodSheError, ValueError):
    pass


class InsufficientSamples(OsgoodSheError, ValueError):
    pass


class InsufficientPaths(OsgoodSheError, ValueError):
    pass


class ExplodedField(OsgoodSheError, ArithmeticError):
    pass


class NegativeDrift(OsgoodSheError, ValueError):
    pass


class ConditionsFailed(OsgoodSheError):
    pass


class ConfigError(OsgoodSheError, ValueError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class IoError(OsgoodSheError, OSError):
    pass

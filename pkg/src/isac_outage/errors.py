"""Exception hierarchy shared by the library and the CLI."""


class ISACError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ISACError, ValueError):
    """An invalid configuration value. ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class DegenerateBeamformer(ISACError, ArithmeticError):
    pass


class SingularFisher(ISACError, ArithmeticError):
    pass


class NonPSDCovariance(ISACError, ValueError):
    pass


class AccuracyNotReached(ISACError, ArithmeticError):
    pass


class QuadratureNotConverged(ISACError, ArithmeticError):
    pass

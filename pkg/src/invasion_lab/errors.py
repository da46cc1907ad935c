"""Exception and warning types shared across the package."""


class InvasionLabError(Exception):
    """Base class for all package errors."""


# geometry
class FeatureUnresolved(InvasionLabError):
    pass


class DisconnectedDomain(InvasionLabError):
    pass


class ProfileViolation(InvasionLabError):
    pass


class NotConnected(InvasionLabError):
    pass


class ConstraintViolation(InvasionLabError):
    """Geometric parameters break the admissibility inequalities."""


# reaction
class EpsTooLarge(InvasionLabError):
    pass


class NoZeroFound(UserWarning):
    """Emitted when min_x f is positive on the whole sampled open interval."""


# solver
class CflViolation(InvasionLabError):
    pass


class NonFiniteValue(InvasionLabError):
    pass


# stationary
class NoPositiveSolution(InvasionLabError):
    pass


class NotConverged(InvasionLabError):
    pass


class ResidualPositive(InvasionLabError):
    """A candidate subsolution has a positive residual somewhere."""

    def __init__(self, message, worst=None, where=None):
        super().__init__(message)
        self.worst = worst
        self.where = where


class NoFrontFound(InvasionLabError):
    pass


# analysis
class BetaSearchFailed(InvasionLabError):
    pass


class RhoTooSmall(InvasionLabError):
    pass


class LevelNeverCrossed(InvasionLabError):
    pass


class NotApplicable(UserWarning):
    """The speed lower bound is non-positive, so it says nothing."""


# config / cli
class ConfigError(InvasionLabError):
    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field

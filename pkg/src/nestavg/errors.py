"""Exception hierarchy for nestavg."""


class NestavgError(ValueError):
    """Base class for every error raised by the package."""


class DimensionMismatch(NestavgError):
    pass


class IndexOutOfRange(NestavgError):
    pass


class RankDeficient(NestavgError):
    """A group of predictors adds no new direction to the earlier groups."""

    def __init__(self, group):
        self.group = group
        super().__init__(f"group {group} is linearly dependent on earlier columns")


class ZeroVariance(NestavgError):
    pass


class InvalidN(NestavgError):
    pass


class NotPsd(NestavgError):
    pass


class TooLargeGrid(NestavgError):
    pass


class LeverageOne(NestavgError):
    pass


class DomainError(NestavgError):
    pass


class KindMismatch(NestavgError):
    pass


class RegimeUndetermined(NestavgError):
    pass


class TooShort(NestavgError):
    pass


class NegativeBeta(NestavgError):
    pass


class SimulationFailed(NestavgError):
    pass


class ConfigError(NestavgError):
    pass

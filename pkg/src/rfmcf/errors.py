"""Exception hierarchy shared by all modules."""


class RfmcfError(Exception):
    """Base class for every error raised by the package."""


class OutOfChart(RfmcfError):
    pass


class DegenerateMetric(RfmcfError):
    pass


class NoPotential(RfmcfError):
    pass


class NonPositiveU(RfmcfError):
    pass


class UnknownBackground(RfmcfError):
    pass


class BadParams(RfmcfError):
    pass


class BadShape(RfmcfError):
    pass


class TooCoarse(RfmcfError):
    pass


class DegenerateTangent(RfmcfError):
    pass


class OpenImmersion(RfmcfError):
    pass


class CflViolation(RfmcfError):
    pass


class NonUniformDt(RfmcfError):
    pass


class RedistributionActive(RfmcfError):
    pass


class WrongSolitonClass(RfmcfError):
    pass


class WrongDimension(RfmcfError):
    pass


class NotMeasurePreserving(RfmcfError):
    pass


class PositivityLoss(RfmcfError):
    pass


class ConfigError(RfmcfError):
    pass

"""Exception types raised by the library."""


class RelentError(Exception):
    """Base class for all library errors."""


class OutsideTubularNeighborhood(RelentError):
    pass


class AmbiguousProjection(RelentError):
    pass


class InvalidCurve(RelentError):
    pass


class DegeneratePolygon(RelentError):
    pass


class InvalidMultiplicity(RelentError):
    pass


class QuadratureNotConverged(RelentError):
    pass


class NotUnit(RelentError):
    pass


class KernelSupportEmpty(RelentError):
    pass


class SelfIntersectingOffset(RelentError):
    pass


class BandOverflow(RelentError):
    pass


class GridTooCoarse(RelentError):
    pass


class IncompatibleVarifold(RelentError):
    pass


class OutOfRegime(RelentError):
    pass


class EmptySeries(RelentError):
    pass


class UnknownScenario(RelentError):
    pass


class PerturbationTooLarge(RelentError):
    pass


class StepTooLarge(RelentError):
    pass


class ConfigInvalid(RelentError):
    pass


class IoError(RelentError):
    pass

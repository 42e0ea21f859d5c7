"""Exception hierarchy shared by all cdspace modules."""


class CdSpaceError(Exception):
    """Base class for every error raised by the package."""


class InvalidSpace(CdSpaceError):
    pass


class DisconnectedGraph(InvalidSpace):
    pass


class NonpositiveEdge(InvalidSpace):
    pass


class InvalidMeasure(CdSpaceError):
    pass


class NumericalBreakdown(CdSpaceError):
    """The float simplex hit its iteration cap; retry with ``exact=True``."""


class BetaUndefined(CdSpaceError):
    pass


class GOutOfRange(CdSpaceError):
    pass


class NoAdmissibleTriple(CdSpaceError):
    """No transport plan can be routed through epsilon-midpoints; try a larger epsilon."""


class CNotInOpenInterval(CdSpaceError):
    pass


class BlendNotIntermediate(CdSpaceError):
    pass


class ThresholdExceeded(CdSpaceError):
    pass


class FNotConvex(CdSpaceError):
    pass


class FZeroNotZero(CdSpaceError):
    pass


class KPositiveRadiusViolated(CdSpaceError):
    pass


class EmptyBall(CdSpaceError):
    pass


class UpperGradientViolated(CdSpaceError):
    pass

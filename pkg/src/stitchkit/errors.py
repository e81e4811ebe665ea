"""Exception hierarchy shared by every stitchkit module."""


class StitchError(Exception):
    """Base class for all stitchkit failures."""


# geometry / fitting
class DegenerateInput(StitchError, ValueError):
    pass


class NoConsensus(StitchError):
    """RANSAC could not find a model supported by enough inliers."""


class NotACircle(StitchError):
    pass


class RayParallel(StitchError):
    pass


class TipUnresolved(StitchError):
    pass


class NonParallel(StitchError):
    """Two planes are further apart in angle than allowed."""


NonParallelPlanes = NonParallel


# raster
class DimensionMismatch(StitchError, ValueError):
    pass


class NoContrast(StitchError):
    pass


class NoEndpoint(StitchError):
    pass


# needle estimation
class RadiusMismatch(StitchError):
    pass


class InsufficientMeasurements(StitchError):
    pass


class EstimateTimeout(StitchError):
    """The gate rejected too many draws to finish the filter.

    ``state`` carries the filter state at the time of giving up.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NotVisible(StitchError):
    pass


# planning
class InvalidCount(StitchError, ValueError):
    pass


class DegenerateExtent(StitchError):
    pass


class ZeroWidth(StitchError, ValueError):
    pass


class ZeroHeight(StitchError, ValueError):
    pass


class InvalidModel(StitchError, ValueError):
    pass


# controller
class IndexOutOfRange(StitchError, IndexError):
    pass


class InvalidLength(StitchError, ValueError):
    pass


class MisalignedStart(StitchError):
    pass


class ArcTooShort(StitchError):
    pass


class DegenerateEstimate(StitchError):
    pass


# configuration / generation
class InvalidConfig(StitchError, ValueError):
    pass


class InvalidRadius(StitchError, ValueError):
    pass


class InvalidParams(StitchError, ValueError):
    pass


class EmptyResults(StitchError, ValueError):
    pass

"""Exception types raised across the package."""


class GeometryError(Exception):
    """Base class for all errors raised by this package."""


class SingularMetric(GeometryError):
    """A metric failed the Cholesky positive-definiteness test."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class RankDeficientOutput(GeometryError):
    """The output map is not a submersion at the given point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class SingularJacobian(GeometryError):
    """A coordinate change has a singular Jacobian."""


class LeftRegion(GeometryError):
    """A curve or trajectory left the declared region."""

    def __init__(self, message, point=None, s=None):
        super().__init__(message)
        self.point = point
        self.s = s


class StepFailure(GeometryError):
    """Step refinement hit the minimum allowed step."""


class NoConvergence(GeometryError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularBlock(GeometryError):
    """A block that must be inverted is singular."""


class RankViolation(GeometryError):
    """Rank conditions of the product-metric construction fail."""

    def __init__(self, message, point=None, rank=None):
        super().__init__(message)
        self.point = point
        self.rank = rank


class NoFeasiblePoint(GeometryError):
    """A parameter search found no admissible value."""


class UnsupportedQ(GeometryError):
    """The requested output metric has no supported squared distance."""


class InsufficientSamples(GeometryError):
    """Too few samples to evaluate a certificate."""


class DimensionMismatch(GeometryError):
    """Array dimensions are inconsistent."""


class NonpositiveWeight(GeometryError):
    """A weight function that must be positive was not."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ConfigError(GeometryError):
    """A job configuration failed validation."""


class MissingArtifacts(GeometryError):
    """Expected job outputs were not found."""

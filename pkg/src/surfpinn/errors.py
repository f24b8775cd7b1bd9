"""Exception types shared across the package."""


class SurfPinnError(Exception):
    """Base class for all package-specific errors."""


class DegenerateNormal(SurfPinnError):
    """Level-set gradient too small to define a unit normal."""


class OutsideBand(SurfPinnError):
    """Point lies outside the closest-point extension band."""


class AmbiguousProjection(SurfPinnError):
    """Closest-point map is not single-valued at this point."""


class UnsupportedSurface(SurfPinnError):
    """Operation needs a parametric chart the surface does not provide."""


class NotSphereHomeomorphic(SurfPinnError):
    """Lattice mapping is only defined for sphere-like surfaces."""


class InvalidCount(SurfPinnError):
    """Nonpositive sample count."""


class ShapeMismatch(SurfPinnError):
    """Input dimensions incompatible with the network layout."""


class InvalidShape(SurfPinnError):
    """Layer size sequence cannot define a valid network."""


class NonFiniteLoss(SurfPinnError):
    """A loss evaluation produced NaN or infinity."""


class NonFiniteUpdate(SurfPinnError):
    """An optimizer step produced NaN or infinity."""


class TrainingDiverged(SurfPinnError):
    """Windowed-median loss grew past the divergence threshold."""


class TableauMismatch(SurfPinnError):
    """Network head count does not match the tableau stage count."""


class StageCountUnsupported(SurfPinnError):
    """Requested stage count outside the supported range."""


class SingularStageSystem(SurfPinnError):
    """Implicit stage system is singular for this step size."""


class InvalidReference(SurfPinnError):
    """Reference horizon for time rescaling must lie in (0, 1)."""


class NoExactSolution(SurfPinnError):
    """Problem has no exact solution to compare against."""


class ZeroDenominator(SurfPinnError):
    """Relative-error denominator is numerically zero."""


class UnknownProblem(SurfPinnError):
    """Problem name not present in the registry."""


class QuadratureTooCoarse(SurfPinnError):
    """Quadrature result not resolution-converged."""

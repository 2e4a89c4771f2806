"""Exception types shared across the package."""


class IrisDeidError(Exception):
    """Base class for all package-specific errors."""


class InsufficientPoints(IrisDeidError):
    """Fewer boundary points than the fit requires."""


class DegenerateFit(IrisDeidError):
    """Conic fit did not produce an ellipse."""


class GeometryInconsistent(IrisDeidError):
    """Ellipse/ray geometry violates a structural assumption."""


class EmptyRegion(IrisDeidError):
    """An operation needs pixels from a region that turned out empty."""


class AllGlint(IrisDeidError):
    """Every pixel is flagged as glint; there is nothing to fill from."""


class DimensionMismatch(IrisDeidError):
    """Rasters with different shapes were combined."""


class LengthMismatch(IrisDeidError):
    """Paired sequences differ in length."""


class NoOverlap(IrisDeidError):
    """Two iris codes share no usable bits at any shift."""


class EmptyAfterTrim(IrisDeidError):
    """Outlier trimming removed every sample."""


class InvalidSpec(IrisDeidError):
    """A synthetic eye specification violates its invariants."""


class ConfigError(IrisDeidError):
    """Pipeline configuration is invalid."""

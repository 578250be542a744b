"""Exception types raised by the stripescan pipeline."""


class StripeScanError(Exception):
    """Base class for all stripescan errors."""


class InfeasibleLength(StripeScanError):
    """Requested sequence length exceeds the window-unique maximum."""


class RasterTooLarge(StripeScanError):
    """Stripe sequence cannot cover the requested raster."""


class DirectionTooClose(StripeScanError):
    """Combined patterns have stripe normals separated by less than the minimum."""


class SizeMismatch(StripeScanError):
    """Input rasters do not share the required shape."""


class ModesNotSeparable(StripeScanError):
    """The requested number of well-separated dominant directions does not exist."""


class DegenerateGeometry(StripeScanError):
    """Ray/plane configuration too close to parallel, or intersection behind the camera."""


class ConfigError(StripeScanError):
    """Invalid, unknown, or out-of-range configuration parameter."""

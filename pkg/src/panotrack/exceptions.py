"""Exception hierarchy shared across the package."""


class PanotrackError(Exception):
    """Base class for all package errors."""


class ConfigError(PanotrackError):
    """Invalid configuration value or inconsistent parameter combination."""


class GeometryError(PanotrackError):
    """Point outside the valid domain of a camera-model mapping."""


class AboveHorizonError(GeometryError):
    """Ground-range requested for a direction at or above the horizon."""


class DegenerateSkeletonError(PanotrackError):
    """Skeleton lacks the joints required by an operation."""


class NoTargetError(PanotrackError):
    """Target selection requested on an empty detection list."""


class FilterDivergenceError(PanotrackError):
    """Track covariance could not be kept positive definite."""


class InputError(PanotrackError):
    """Malformed or inconsistent input stream/file."""

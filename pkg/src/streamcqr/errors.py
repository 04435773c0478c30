"""Exception types shared across the package."""


class StreamCQRError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(StreamCQRError):
    """Invalid configuration: bad grids, node sets, or parameters."""


class DataError(StreamCQRError):
    """Malformed, non-finite, or otherwise unusable input data."""


class DensityTooSmall(StreamCQRError):
    """Kernel density mass at a grid point fell below the stability floor."""

    def __init__(self, grid_index, value, floor):
        self.grid_index = grid_index
        self.value = value
        self.floor = floor
        super().__init__(
            "density %.3g at grid index %d is below the floor %.3g"
            % (value, grid_index, floor)
        )


class LevelSetEmpty(StreamCQRError):
    """The estimated CDF never enters the requested quantile band."""


class CurvePointError(StreamCQRError):
    """Curve estimation failed at a specific covariate grid point."""

    def __init__(self, grid_index, cause):
        self.grid_index = grid_index
        self.cause = cause
        super().__init__("grid index %d: %s" % (grid_index, cause))


class DegenerateSeparation(StreamCQRError):
    """Lower and upper trimmed components are numerically identical."""


class NegativeVariance(StreamCQRError):
    """Second-moment matching produced a negative variance estimate."""


class ZeroDenominator(StreamCQRError):
    """A normalizing moment or error measure is numerically zero."""


class ZeroKernelMass(StreamCQRError):
    """No kernel mass at the requested evaluation point."""


class ChunkTooSmall(StreamCQRError):
    """A data chunk cannot support a local estimate on its own."""


class SingularMomentSystem(StreamCQRError):
    """The 2x2 moment system of the optimal-weight problem is singular."""


class CheckpointError(StreamCQRError):
    """Unreadable, incompatible, or inconsistent checkpoint file."""

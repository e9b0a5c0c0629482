"""Exception types shared across the package."""


class NlsromError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NlsromError, ValueError):
    """Invalid parameters or inconsistent configuration."""


class MeshError(NlsromError):
    """The triangulation is not a conforming periodic grid."""


class AssemblyError(NlsromError):
    """Degenerate element data met during assembly."""


class PointLocationError(NlsromError, LookupError):
    """A point does not lie in the element it was attributed to."""


class ConvergenceError(NlsromError, RuntimeError):
    """Newton iteration did not reach the residual tolerance."""

    def __init__(self, message, residual_norm=float("nan"), iterations=0, step=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations
        self.step = step


class DegenerateInputError(NlsromError, ValueError):
    """Input data is all zero or otherwise carries no information."""


class SelectionError(NlsromError, ValueError):
    """DEIM greedy selection met a linearly dependent basis column."""


class RankDeficiencyError(NlsromError, ValueError):
    """Requested rank exceeds the numerical rank of the snapshot data."""


class SaturationError(NlsromError, OverflowError):
    """A DMD mode grows beyond floating point range at the requested time."""

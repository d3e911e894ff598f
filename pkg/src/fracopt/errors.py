"""Exception types raised by the solvers and checks."""


class FracoptError(Exception):
    """Base class for all library-specific failures."""


class ContractionFailure(FracoptError):
    """Per-step fixed point cannot contract; refine the grid or shrink ``a``."""


class NonFiniteError(FracoptError):
    """A solver produced NaN or Inf values."""


class MittagLefflerRangeError(FracoptError, ValueError):
    """Argument outside the supported series range of the Mittag-Leffler function."""


class ProjectionFailure(FracoptError):
    """Active-set projection did not reach the KKT tolerance within its cycle guard."""


class LineSearchFailure(FracoptError):
    """Armijo backtracking exhausted its budget without sufficient decrease."""


class ConfigError(FracoptError, ValueError):
    """Malformed or inconsistent run configuration."""

"""Exception types shared across the package."""


class FBSDiffError(Exception):
    """Base class for all library errors."""


class InvalidInputError(FBSDiffError, ValueError):
    """A tensor argument violates a shape, dtype, or finiteness contract."""


class InvalidThresholdError(FBSDiffError, ValueError):
    """Band mask thresholds are inconsistent (e.g. mid lower bound >= upper)."""


class InvalidConfigError(FBSDiffError, ValueError):
    """A configuration value is out of range or inconsistent."""


class SingularScheduleError(FBSDiffError, ValueError):
    """An operation required alpha_bar > 0 but the schedule reached 0."""


class BackendError(FBSDiffError, RuntimeError):
    """A remote backend failed, timed out, or violated the wire protocol."""


class PipelineError(FBSDiffError, RuntimeError):
    """A pipeline stage aborted; the message carries the stage tag."""

"""Exception types shared across the package."""


class OctominiError(Exception):
    """Base class for all octomini errors."""


class CapacityError(OctominiError):
    """A requested tree or grid would exceed the configured memory budget."""


class StructureError(OctominiError):
    """The octree violates a structural invariant (e.g. 2:1 level balance)."""


class NumericsError(OctominiError):
    """A numerical guard tripped (CFL violation, non-finite state, ...)."""


class ConfigError(OctominiError):
    """Invalid run configuration; carries the offending field name."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class CheckpointError(OctominiError):
    """Checkpoint file is unreadable, truncated, or of the wrong version."""


class PoolError(OctominiError):
    """Buffer pool misuse (double release, release of unknown buffer)."""


class ShutdownError(OctominiError):
    """Operation attempted on a scheduler or lane pool that was shut down."""


class ConvergenceError(OctominiError):
    """An iterative solver failed to converge; carries the residual history."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []

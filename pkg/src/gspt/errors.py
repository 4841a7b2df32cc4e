"""Exception taxonomy shared by all modules.

Config problems exit the CLI with code 2, everything else with 3.
"""


class GsptError(Exception):
    """Base class for all library errors."""


class DomainError(GsptError):
    """A field evaluation left its domain (non-finite value, overflow)."""


class PreconditionError(GsptError):
    """An operation was called outside its documented precondition."""


class ConfigError(GsptError):
    """Invalid run configuration (schema violation, unknown key, bad value)."""


class ComputationError(GsptError):
    """A numerical procedure failed to produce a usable result."""


class StalledAtSingularityError(ComputationError):
    """Layer integration entered the neighbourhood of an N-singularity."""


class EscapeError(ComputationError):
    """A trajectory left the window / never reached the requested section."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StiffnessError(ComputationError):
    """Explicit step size underflowed; problem too stiff at this tolerance."""


class IntegrationTimeoutError(ComputationError):
    """Max integration time exceeded before any stop event fired."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory

"""Exception hierarchy shared by all modules."""

__all__ = [
    "PhotonTransistorError",
    "ConfigError",
    "ConvergenceError",
    "OptimizationFailure",
    "Infeasible",
    "MappingInvalid",
]


class PhotonTransistorError(Exception):
    """Base class of all errors raised by this package."""


class ConfigError(PhotonTransistorError, ValueError):
    """Invalid or under-resolved configuration."""


class ConvergenceError(PhotonTransistorError, RuntimeError):
    """A refinement check changed the result by more than allowed."""


class OptimizationFailure(PhotonTransistorError, RuntimeError):
    """The local search did not improve on its grid seed."""


class Infeasible(PhotonTransistorError, ValueError):
    """No physical circuit realizes the requested targets."""


class MappingInvalid(PhotonTransistorError, ValueError):
    """A circuit does not map onto the pure ZZ Hamiltonian."""

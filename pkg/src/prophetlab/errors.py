"""Exception types shared across the library."""


class ProphetLabError(Exception):
    """Base class for all library errors."""


class InvalidQuantileError(ProphetLabError, ValueError):
    """Quantile outside [0, 1)."""


class InvalidInstanceError(ProphetLabError, ValueError):
    """Malformed distribution or instance (bad masses, empty base, k < 1, ...)."""


class InvalidParameterError(ProphetLabError, ValueError):
    """Parameter outside its admissible range (n = 0 roots, epsilon > 1/e, ...)."""


class PolicyMismatchError(ProphetLabError, ValueError):
    """Policy was built for a different instance shape than the one supplied."""


class TooLargeInstanceError(ProphetLabError, RuntimeError):
    """Exact evaluation refused: state space exceeds the configured cap."""


class ConfigError(ProphetLabError, ValueError):
    """Bad CLI configuration or malformed input file."""

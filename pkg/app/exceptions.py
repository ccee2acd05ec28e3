from app.constants import EXIT_INPUT_ERROR, EXIT_SOLVER_FAIL


class BolzaError(Exception):
    """Base class. Each subclass knows the exit code it maps to."""
    exit_code = EXIT_INPUT_ERROR


class ConfigurationError(BolzaError, ValueError):
    pass


class FlavorError(ConfigurationError):
    pass


class DimensionError(BolzaError, ValueError):
    pass


class GridIndexError(BolzaError, IndexError):
    pass


class PreconditionError(BolzaError, ValueError):
    pass


class UnsupportedError(BolzaError):
    pass


class ProblemFileError(BolzaError):
    pass


class NumericalFailure(BolzaError):
    exit_code = EXIT_SOLVER_FAIL

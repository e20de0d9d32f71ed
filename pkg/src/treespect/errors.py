"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class TreespectError(Exception):
    """Base class for all structured errors raised by this package."""

    exit_code = 1


class ConfigError(TreespectError):
    """Invalid configuration, missing files, malformed parameters."""

    exit_code = 2


class DataError(TreespectError):
    """Unusable input data: too short, non-finite, wrong shape."""

    exit_code = 3


class NumericalError(TreespectError):
    """Numerical failure: singular matrices, unstable models, overflow."""

    exit_code = 4


class AssumptionViolation(TreespectError):
    """The input violates the structural assumptions the guarantees need."""

    exit_code = 5

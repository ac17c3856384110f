"""Exception hierarchy. CLI exit codes are attached to the classes.

Input-validity errors (bad config, impossible geometry, ambiguous target)
share exit code 2.
"""


class RydoptError(Exception):
    exit_code = 1


class ConfigError(RydoptError, ValueError):
    exit_code = 2


class UsageError(RydoptError, ValueError):
    """Inconsistent arguments, e.g. a state and operator on different bases."""

    exit_code = 2


class DomainError(RydoptError, ValueError):
    exit_code = 2


class ModelValidityError(RydoptError, ValueError):
    """The super-atom reduction does not hold for the given geometry."""

    exit_code = 2


class AmbiguityError(RydoptError, ValueError):
    exit_code = 2


class NumericalError(RydoptError, RuntimeError):
    exit_code = 3


class ConstraintError(RydoptError, ValueError):
    exit_code = 4

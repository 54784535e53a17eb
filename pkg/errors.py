"""
Exception hierarchy for the extension toolkit
Every error carries the exit code the command line reports for it
"""


class ExtensionError(Exception):
    """Base class for all toolkit errors"""
    exit_code = 1


class InvalidInputError(ExtensionError):
    """Input data violates a documented precondition"""
    exit_code = 2


class InvalidArgumentError(InvalidInputError):
    """A scalar argument is out of range"""


class InsufficientDataError(InvalidInputError):
    """Too few samples for the requested operation"""


class DegenerateChordError(InvalidInputError):
    """A chord was requested between coincident points"""


class ConfigError(ExtensionError):
    """Configuration is invalid or too loose for the given data"""
    exit_code = 2


class ToleranceNotMetError(ExtensionError):
    """An iterative or adaptive computation did not converge"""
    exit_code = 3

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate


class InternalError(ExtensionError):
    """An invariant of a constructed object was violated"""
    exit_code = 1

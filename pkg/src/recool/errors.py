"""Exception types shared across the package.

Every error raised on purpose by this package derives from ``RecoolError`` so
the command line front end can map failures onto exit codes.
"""


class RecoolError(Exception):
    exit_code = 1


class DomainError(RecoolError, ValueError):
    """An argument lies outside the domain of an operation."""
    exit_code = 2


class RegimeError(DomainError):
    """A closed-form approximation was requested outside its validity regime."""


class NumericalError(RecoolError, ArithmeticError):
    """Quadrature, ODE integration or a fit did not meet its tolerance."""
    exit_code = 4

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class DegenerateInputError(RecoolError, ValueError):
    """Input data carries no information about the requested quantity."""
    exit_code = 5


class DetectionError(RecoolError):
    """Peak detection failed on a scan trace."""
    exit_code = 6


class LookupFailure(RecoolError, KeyError):
    """Unknown key in one of the reference tables."""
    exit_code = 7

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ParseError(RecoolError, ValueError):
    """Malformed input file."""
    exit_code = 8

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class ConfigError(RecoolError, ValueError):
    """Configuration failed schema validation."""
    exit_code = 3


class MissingFileError(RecoolError, FileNotFoundError):
    """An input file named on the command line or in the config does not exist."""
    exit_code = 9


class UsageError(RecoolError):
    """Bad command-line usage."""
    exit_code = 10

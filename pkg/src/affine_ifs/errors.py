"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class IFSError(Exception):
    exit_code = 1


class DomainError(IFSError, ValueError):
    """An argument lies outside the domain of a map or constructor."""

    exit_code = 5


class PreconditionError(IFSError, ValueError):
    """A regime or parameter precondition of an operation is violated."""

    exit_code = 5


class ConvergenceError(IFSError, ArithmeticError):
    exit_code = 4


class NumericalError(IFSError, ArithmeticError):
    """A computation landed in a numerically degenerate configuration."""

    exit_code = 4


class ResourceError(IFSError, RuntimeError):
    """An exhaustive computation would exceed its configured cap."""

    exit_code = 5


class UsageError(IFSError):
    exit_code = 2


class OutputError(IFSError, OSError):
    """A report could not be written."""

    exit_code = 3

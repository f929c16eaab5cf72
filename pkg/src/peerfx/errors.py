"""Exception hierarchy. The CLI maps these onto exit codes."""


class PeerFxError(Exception):
    """Base class for package errors."""


class GraphError(PeerFxError, ValueError):
    """Invalid network input."""


class DataError(PeerFxError, ValueError):
    """Malformed or inconsistent data files or arrays."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class ConfigError(PeerFxError, ValueError):
    """Bad run configuration or instrument/model specification."""


class IdentificationError(PeerFxError, ArithmeticError):
    """Rank failure in the instrument or moment matrices.

    ``columns`` names the offending instrument columns, when known.
    """

    def __init__(self, message, columns=()):
        self.columns = tuple(columns)
        super().__init__(message)


class UndefinedStatisticError(PeerFxError, ArithmeticError):
    """A test statistic has zero variance in its denominator."""

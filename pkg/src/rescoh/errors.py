"""Exception and warning types raised across the package."""


class RescohError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RescohError, ValueError):
    """Raised when an argument violates an operation's preconditions."""


class DegenerateSpectrumError(RescohError):
    """An autospectrum fell below the positivity floor."""

    def __init__(self, message, frequency=None):
        super().__init__(message)
        self.frequency = frequency


class SingularSystemError(RescohError):
    """The per-frequency input matrix is numerically singular."""

    def __init__(self, message, frequency=None, lags=None):
        super().__init__(message)
        self.frequency = frequency
        self.lags = lags


class DegenerateComponentError(RescohError):
    """The normalising spectrum of an orthogonal component vanished."""

    def __init__(self, message, frequency=None):
        super().__init__(message)
        self.frequency = frequency


class InconsistentSystemError(RescohError):
    """A component spectrum came out complex or clearly negative."""

    def __init__(self, message, frequency=None):
        super().__init__(message)
        self.frequency = frequency


class CollinearDesignError(RescohError):
    """The regression design matrix is rank deficient."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class ParseError(RescohError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class AlignmentError(RescohError):
    pass


class FetchError(RescohError):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class OfflineError(FetchError):
    pass


class DegenerateSpectrumWarning(RuntimeWarning):
    """An autospectrum was clamped to the floor before division."""


class ClampedComponentWarning(RuntimeWarning):
    """Small negative component spectra were clamped to zero."""

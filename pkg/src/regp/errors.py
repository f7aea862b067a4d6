"""Exception types shared across the package."""


class RegpError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(RegpError, ValueError):
    """A model or scoring parameter is outside its valid range."""


class InvalidInputError(RegpError, ValueError):
    """Malformed input data (shape mismatch, duplicate points, ...)."""


class SingularGramError(RegpError):
    """The Gram matrix could not be factored even at maximum jitter."""


class FitFailedError(RegpError):
    """Every optimization start failed; carries per-start diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class SelectionFailedError(RegpError):
    """No candidate relaxation set could be fitted."""


class UnsupportedOrderError(RegpError, ValueError):
    """Requested an order of the max-excess expectation beyond q in {1, 2}."""


class InvalidThresholdError(RegpError, ValueError):
    """A validation threshold is incompatible with the observed values."""

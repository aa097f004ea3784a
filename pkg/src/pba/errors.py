class PbaError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(PbaError, ValueError):
    """Malformed input file, record, or serialized object."""


class ConvergenceError(PbaError, RuntimeError):
    """An iterative or quadrature routine failed to reach its tolerance."""


class ModelMismatchError(PbaError, ValueError):
    """A container was decoded with a model other than the one that wrote it."""

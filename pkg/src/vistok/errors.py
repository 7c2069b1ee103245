"""Exception types shared across the package.

The CLI maps these onto exit codes: config problems -> 1, numeric failures
(non-finite values) -> 2, acceptance/check failures -> 3.
"""


class VistokError(Exception):
    """Base class for all package errors."""


class ShapeError(VistokError):
    """Operands with incompatible shapes; message names the op and shapes."""


class NumericError(VistokError):
    """A tensor that must be finite contains NaN or Inf."""


class ConfigError(VistokError):
    """Invalid run configuration; message lists the offending keys."""


class ContextOverflowError(VistokError):
    """A sequence would exceed the model's context window."""


class MissingFeatureError(VistokError):
    """A file-backed teacher has no feature file for the requested key."""


class CheckFailure(VistokError):
    """An internal verification suite (e.g. the gradient checker) failed."""

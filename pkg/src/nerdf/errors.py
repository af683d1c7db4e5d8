"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, FormatError -> 3,
DivergenceError and environment failures -> 4.
"""


class NerdfError(Exception):
    """Base class for all package errors."""


class InputError(NerdfError, ValueError):
    """A rejected input: precondition or invariant violated by the caller."""


class StructuralError(NerdfError, ValueError):
    """Shapes, lengths, or recorded state do not line up."""


class ConfigError(NerdfError, ValueError):
    """Unresolvable, unknown, or inconsistent configuration."""


class FormatError(NerdfError, ValueError):
    """Malformed or incompatible on-disk data (checkpoints, images)."""


class DivergenceError(NerdfError, RuntimeError):
    """Training produced non-finite values; carries a diagnostic snapshot."""

"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, NumericError -> 3,
everything else -> 1.
"""


class TriaugError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TriaugError):
    """Invalid configuration, incompatible artifacts, or malformed input files."""


class NumericError(TriaugError):
    """Non-finite values, divergence, or numerically degenerate state."""


class ShapeMismatchError(TriaugError):
    """Operands with incompatible shapes; message names both shapes."""


class DegenerateInputError(NumericError):
    """Input outside an operation's valid domain (e.g. zero-norm vector)."""


class GraphConsumedError(TriaugError):
    """A backward pass was requested on an already-consumed graph."""


class DataFormatError(ConfigError):
    """A dataset, checkpoint, or bank file does not match its on-disk format."""

"""Exception types shared across the package.

Everything raised on purpose derives from ComplabError so callers can
catch one base class at the CLI boundary and map it to an exit code.
"""


class ComplabError(Exception):
    """Base class for all errors raised deliberately by this package."""


class InvalidClassCount(ComplabError, ValueError):
    """Class count outside the supported range (needs c > 2)."""


class ShapeError(ComplabError, ValueError):
    """Array argument has the wrong shape for the operation."""


class ValidationError(ComplabError, ValueError):
    """A structural invariant does not hold (row sums, negative mass, ...)."""


class ParseError(ComplabError, ValueError):
    """Malformed text input; message carries the offending line number."""


class InconsistentWidth(ParseError):
    """Tabular row with a different field count than the first row."""


class RetriesExhausted(ComplabError, RuntimeError):
    """A bounded rejection-sampling loop ran out of attempts."""


class EmptyDataset(ComplabError, ValueError):
    """Operation needs at least one example."""


class EmptyAnchorClass(ComplabError, ValueError):
    """No anchor rows were supplied for some class."""


class DivergenceError(ComplabError, RuntimeError):
    """Training loss became non-finite."""


class GridTooCoarse(ComplabError, RuntimeError):
    """Simplex grid search cannot certify a unique argmax at this resolution."""


class BadMagic(ComplabError, ValueError):
    """Binary file does not start with the expected magic number."""


class TruncatedFile(ComplabError, ValueError):
    """Binary file ended before the declared payload was read."""


class UsageError(ComplabError, ValueError):
    """Bad command-line arguments or unusable input files."""

"""Exception hierarchy for the package.

Everything raised on bad data or bad usage derives from IsoflowError so the
CLI can map library failures to a single nonzero exit code.
"""


class IsoflowError(Exception):
    """Base class for all errors raised by this package."""


class NumericsError(IsoflowError):
    """Invalid input to a linear-algebra or sampling kernel."""


class FormatError(IsoflowError):
    """A binary file does not carry the expected magic/version."""


class CorruptFileError(IsoflowError):
    """A binary file has the right magic but inconsistent contents."""


class ParseError(IsoflowError):
    """A text data file is malformed; the message carries the line number."""


class DegenerateDimensionError(IsoflowError):
    """A dimension with zero variance where a positive spread is required."""


class FlowError(IsoflowError):
    """Invalid flow-model state or non-finite values during flow math."""


class EvalError(IsoflowError):
    """Undefined metric value (zero-norm vector, constant ranks, one class)."""

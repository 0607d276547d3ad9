"""Exception hierarchy shared by all modules.

CLI exit-code mapping: InputError (and subclasses) -> 2, NumericalError -> 3.
"""


class DeepsrError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DeepsrError):
    """Rejected input: bad dimensions, non-finite values, invalid config."""


class FormatError(InputError):
    """Malformed file: bad header, truncation, unsupported version."""


class NumericalError(DeepsrError):
    """Numerical failure: non-SPD system, degenerate Lipschitz estimate."""

"""Exception types shared across the package."""


class MaskRefineError(Exception):
    """Base class for all errors raised by maskrefine."""


class DataError(MaskRefineError, ValueError):
    """Malformed input: bad files, shape mismatches, invalid parameters."""


class NumericalError(MaskRefineError, ArithmeticError):
    """A numerical procedure could not produce a finite result."""

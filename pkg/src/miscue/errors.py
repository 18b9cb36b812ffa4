"""Exception types shared across the toolkit."""


class DataError(ValueError):
    """Malformed input data or a violated format/validation contract."""


class NumericError(ArithmeticError):
    """Numerical failure, e.g. a non-finite loss during training."""

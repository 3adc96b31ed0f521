"""Error types shared across the package."""


class InputError(ValueError):
    """Malformed problem data: bad dimensions, empty pieces, bad schema."""


class NumericalFailure(RuntimeError):
    """A computation could not reach its stated tolerance.

    Raised instead of silently degrading; carries enough text to locate
    the offending operation.
    """

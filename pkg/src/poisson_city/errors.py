"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A sampler or geometric routine received a parameter outside its domain."""


class OutOfRangeError(ValueError):
    """An abscissa lies outside the represented part of a curve."""


class NeedsExtensionError(ValueError):
    """The query needs a deeper curve than the one supplied."""


class DivergenceError(RuntimeError):
    """Curve extension hit its iteration cap or left floating-point range."""


class EmptySampleError(ValueError):
    """A line realization has no lines where some were required."""

"""Exception hierarchy shared by all csfilter modules."""


class CSFilterError(ValueError):
    """Base class for every validation or numerical failure raised here."""


class SpecError(CSFilterError):
    pass


class GridError(CSFilterError):
    pass


class RangeError(CSFilterError):
    pass


class StepError(CSFilterError):
    pass


class AliasingError(CSFilterError):
    """A band edge lies above the Nyquist frequency of the sampling grid."""


class SizeError(CSFilterError):
    pass


class DimensionError(CSFilterError):
    pass


class InstabilityError(CSFilterError, ArithmeticError):
    """Proximal-gradient objective kept growing; the step size is too large."""


class DegenerateDictionaryError(CSFilterError):
    pass


class FormatError(CSFilterError):
    """Malformed on-disk artifact (bad magic, truncated payload, wrong keys)."""

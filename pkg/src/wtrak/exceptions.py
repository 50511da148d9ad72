"""Exception hierarchy.

Every error raised by the package derives from :class:`WTrakError`.
:class:`InputError` subclasses signal bad inputs or files (CLI exit code 2);
:class:`NumericalError` subclasses signal numerical failure (exit code 3).
"""


class WTrakError(Exception):
    """Base class for all package errors."""


class InputError(WTrakError, ValueError):
    """Invalid input, specification or file."""


class NumericalError(WTrakError, ArithmeticError):
    """A numerical routine failed."""


class NonFiniteInput(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class NegativeInput(InputError):
    pass


class NegativeEpsilon(NegativeInput):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class BadLabels(InputError):
    pass


class DuplicatePoints(InputError):
    pass


class TooFewPoints(InputError):
    pass


class MixedMetric(InputError):
    pass


class MixedEpsilon(InputError):
    pass


class EmptyGrid(InputError):
    pass


class MissingSeries(InputError):
    pass


class SingleClass(InputError):
    pass


class BadSpec(InputError):
    pass


class BadMagic(InputError):
    pass


class TruncatedFile(InputError):
    pass


class NonFiniteValue(InputError):
    pass


class SingularCovariance(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass

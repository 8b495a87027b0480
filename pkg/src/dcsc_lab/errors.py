"""Exception hierarchy shared by every dcsc_lab module."""


class DCSCError(Exception):
    """Base class for all library errors."""


class InvalidSpec(DCSCError, ValueError):
    """A shape, stride or budget description is internally inconsistent."""


class NonUnitColumns(DCSCError, ValueError):
    pass


class IncompatibleStride(InvalidSpec):
    pass


class SingleColumn(DCSCError, ValueError):
    pass


class DimensionMismatch(DCSCError, ValueError):
    pass


class InvalidAlpha(DCSCError, ValueError):
    pass


class EmptyMatrix(DCSCError, ValueError):
    pass


class ConstraintUnsatisfiable(DCSCError, RuntimeError):
    """Rejection sampling exhausted its retry budget."""


class KOutOfRange(DCSCError, ValueError):
    pass


class ChainMismatch(DCSCError, ValueError):
    """Per-layer noise levels do not follow the error recursion."""


class ZeroCoherence(DCSCError, ZeroDivisionError):
    pass


class InfeasibleConfig(DCSCError, ValueError):
    pass


class IOFailure(DCSCError, OSError):
    pass

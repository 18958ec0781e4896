"""Exception types shared across the package.

SchemaError covers malformed inputs, files, and configs (CLI exit code 2).
NumericalError covers runtime numerical failures (CLI exit code 5).
Everything derives from TrajdiffError so callers can catch broadly.
"""


class TrajdiffError(Exception):
    pass


class SchemaError(TrajdiffError, ValueError):
    pass


class NumericalError(TrajdiffError, ArithmeticError):
    pass


# geometry
class ZeroNormQuaternion(NumericalError):
    pass


# spline
class TooFewObservations(SchemaError):
    pass


class IndexOutOfRange(SchemaError):
    pass


class DegeneratePolyline(NumericalError):
    """Raised only where a flagless API needs it; resampling returns a flag instead."""


# nn
class ShapeMismatch(SchemaError):
    pass


class MissingForwardCache(TrajdiffError):
    pass


class CorruptCheckpoint(SchemaError):
    pass


# diffusion
class InvalidSteps(SchemaError):
    pass


class EmptyDataset(SchemaError):
    pass


class NonFiniteLoss(NumericalError):
    pass


# metrics
class LengthMismatch(SchemaError):
    pass


class OutOfRange(SchemaError):
    pass


class NonPositiveInput(SchemaError):
    pass


# ranking
class EmptyComparisons(SchemaError):
    pass


class NoWinsForAnyMethod(SchemaError):
    pass


class UnknownMethodName(SchemaError):
    pass


class NonPositivePi(NumericalError):
    pass


# scale
class NoValidSamples(SchemaError):
    pass


class NonPositiveScale(SchemaError):
    pass


# data
class StrideTooLarge(SchemaError):
    pass


class InvalidParams(SchemaError):
    pass


class MalformedHeader(SchemaError):
    pass


class NonFiniteValue(SchemaError):
    pass


class NonUnitQuaternion(SchemaError):
    pass

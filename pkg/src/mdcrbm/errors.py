"""Exception hierarchy.

Every error raised deliberately by the package derives from :class:`MdcError`.
The CLI maps :class:`DataError` to exit code 2 and :class:`NumericError` to
exit code 3.
"""


class MdcError(Exception):
    """Base class for all package errors."""


class DataError(MdcError, ValueError):
    """Input data or arguments do not satisfy a contract."""


class NumericError(MdcError, ArithmeticError):
    """A numerical computation failed (non-finite values, divergence)."""


# schema
class ConstantColumn(DataError):
    pass


class MissingColumn(DataError):
    pass


class UnknownLevel(DataError):
    pass


class OutOfDomain(DataError):
    pass


class LengthMismatch(DataError):
    pass


class SchemaError(DataError):
    pass


# rbm core
class ShapeMismatch(DataError):
    pass


class TooLarge(DataError):
    pass


class UnsupportedKind(DataError):
    pass


class VersionMismatch(DataError):
    pass


# trainer
class NonFiniteGradient(NumericError):
    pass


class UnknownBlock(DataError):
    pass


# generator / elasticity
class TargetNotCategorical(DataError):
    pass


class MissingKnown(DataError):
    pass


class NothingUnknown(DataError):
    pass


class NotConditionable(DataError):
    pass


class ZeroProbability(NumericError):
    pass


class NonContinuousVariable(DataError):
    pass


# stats
class EmptySample(DataError):
    pass


class LevelMismatch(DataError):
    pass


class ZeroExpected(DataError):
    pass


# cli
class UnknownRecipe(DataError):
    pass

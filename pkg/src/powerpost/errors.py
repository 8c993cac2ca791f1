"""Exception hierarchy.

Errors fall into three buckets that the CLI maps to exit codes: bad
configuration (2), bad data (3) and numerical failure (4).
"""


class PowerPostError(Exception):
    exit_code = 4


class ConfigError(PowerPostError):
    exit_code = 2


class DataError(PowerPostError):
    exit_code = 3


class NumericalError(PowerPostError):
    exit_code = 4


class NonPositiveAlpha(ConfigError):
    pass


class AlphaOutOfRange(ConfigError):
    pass


class IndexOutOfRange(ConfigError):
    pass


class SingularDesign(NumericalError):
    pass


class DegenerateDOF(DataError):
    pass


class DegenerateFold(DataError):
    pass


class DegenerateLeverage(NumericalError):
    pass


class EmptyFold(DataError):
    pass


class SupportViolation(DataError):
    pass


class ParameterOutOfSpace(ConfigError):
    pass


class Separation(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class UnsupportedPair(ConfigError):
    pass


class MomentUndefined(NumericalError):
    pass


class InsufficientData(DataError):
    pass


class ParseError(DataError):
    pass


class SizeTooLarge(DataError):
    pass


class SchemaMismatch(DataError):
    pass

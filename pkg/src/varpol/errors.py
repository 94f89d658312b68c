"""Exception hierarchy shared by every module.

Each error carries an ``exit_code`` so the CLI can map failures to
distinct process exit statuses without a lookup table of its own.
"""


class VarpolError(Exception):
    exit_code = 10


# marketdata
class MissingFile(VarpolError, FileNotFoundError):
    exit_code = 11


class MalformedRow(VarpolError, ValueError):
    exit_code = 12

    def __init__(self, line, detail=""):
        self.line = line
        super().__init__(f"malformed row at line {line}{': ' + detail if detail else ''}")


class NonPositivePrice(VarpolError, ValueError):
    exit_code = 13

    def __init__(self, line):
        self.line = line
        super().__init__(f"non-positive close at line {line}")


class DuplicateDate(VarpolError, ValueError):
    exit_code = 14

    def __init__(self, date):
        self.date = date
        super().__init__(f"duplicate date {date}")


class TooShort(VarpolError, ValueError):
    exit_code = 15


class InsufficientData(VarpolError, ValueError):
    exit_code = 16


# dists
class OutOfRange(VarpolError, ValueError):
    exit_code = 20


class QuadratureFailure(VarpolError, ArithmeticError):
    exit_code = 21


# fit
class DegenerateSample(VarpolError, ValueError):
    exit_code = 30


class NonPositiveSample(VarpolError, ValueError):
    exit_code = 31


class RootNotBracketed(VarpolError, ArithmeticError):
    exit_code = 32


class EmNotConverged(VarpolError, ArithmeticError):
    exit_code = 33


class TooFewSamples(VarpolError, ValueError):
    exit_code = 34


class OptimizerStalled(VarpolError, ArithmeticError):
    exit_code = 35


# gof
class EmptySample(VarpolError, ValueError):
    exit_code = 40


class UnsupportedLevel(VarpolError, ValueError):
    exit_code = 41


# policy / backtest
class ZeroAllocation(VarpolError, ValueError):
    exit_code = 50


class NoRoot(VarpolError, ArithmeticError):
    exit_code = 51


class NonMonotone(VarpolError, ArithmeticError):
    exit_code = 52


class LengthMismatch(VarpolError, ValueError):
    exit_code = 53


# cli
class UnknownFlag(VarpolError, ValueError):
    exit_code = 60


class InvalidValue(VarpolError, ValueError):
    exit_code = 61

    def __init__(self, field, detail=""):
        self.field = field
        super().__init__(f"invalid value for {field}{': ' + detail if detail else ''}")

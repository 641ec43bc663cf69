"""Exception hierarchy. Each class carries a stable integer ``code``.

The CLI uses ``code`` as its process exit status, so values must never be
renumbered; add new classes with new codes only.
"""


class KahlerFlowError(Exception):
    code = 1


class GridTooSmall(KahlerFlowError, ValueError):
    code = 10


class PositivityViolation(KahlerFlowError):
    code = 11


class RegularityViolation(KahlerFlowError):
    code = 12


class DifferentiationFailure(KahlerFlowError):
    code = 13


class EigenSolveFailure(KahlerFlowError):
    code = 14


class ConditioningFailure(KahlerFlowError):
    code = 20


class IndexOutOfRange(KahlerFlowError, IndexError):
    code = 30


class PathTooCoarse(KahlerFlowError):
    code = 31


class StepRejectionLimit(KahlerFlowError):
    code = 40


class RootNotBracketed(KahlerFlowError):
    code = 41


class InsufficientTail(KahlerFlowError, ValueError):
    code = 42


class ParseError(KahlerFlowError, ValueError):
    code = 50


class RangeError(KahlerFlowError, ValueError):
    code = 51


class OutputError(KahlerFlowError, OSError):
    code = 52


ERROR_CODES = {
    cls.__name__: cls.code
    for cls in (
        KahlerFlowError,
        GridTooSmall,
        PositivityViolation,
        RegularityViolation,
        DifferentiationFailure,
        EigenSolveFailure,
        ConditioningFailure,
        IndexOutOfRange,
        PathTooCoarse,
        StepRejectionLimit,
        RootNotBracketed,
        InsufficientTail,
        ParseError,
        RangeError,
        OutputError,
    )
}

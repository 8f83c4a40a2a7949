"""Exception hierarchy shared by all modules.

Each class carries a stable ``code`` used as the CLI exit status and a
``precondition`` naming the check that failed.
"""
from __future__ import annotations


class LoopCalcError(Exception):
    code = 1

    def __init__(self, message: str, precondition: str | None = None):
        super().__init__(message)
        self.precondition = precondition

    def to_dict(self) -> dict:
        return {
            "type": type(self).__name__,
            "code": self.code,
            "message": str(self),
            "precondition": self.precondition,
        }


class ParameterError(LoopCalcError, ValueError):
    code = 2


class DomainError(LoopCalcError, ValueError):
    code = 2


class SizeGuardError(LoopCalcError):
    code = 3


class SamplingError(LoopCalcError):
    code = 4


class DegenerateMessageError(LoopCalcError, ArithmeticError):
    code = 5


class DegenerateFixedPointError(LoopCalcError, ArithmeticError):
    code = 5


class DegenerateWeightError(LoopCalcError, ArithmeticError):
    code = 5


class NumericalError(LoopCalcError, ArithmeticError):
    code = 6


class ResolutionError(NumericalError):
    code = 6


class CertificationError(LoopCalcError):
    code = 7


class ConsistencyError(LoopCalcError, AssertionError):
    """Raised when an internal invariant that should be impossible is violated."""
    code = 8


class UsageError(LoopCalcError):
    """Unknown command or malformed command line."""
    code = 9


class CacheError(LoopCalcError):
    code = 10

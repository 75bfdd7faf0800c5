"""Exception hierarchy.

Every error carries a short ``category`` string and the process exit code the
command-line front end uses when it surfaces the error.
"""

from __future__ import annotations


class RsmError(Exception):
    category = "Error"
    exit_code = 1


class InvalidConfig(RsmError, ValueError):
    category = "InvalidConfig"
    exit_code = 2


class InvalidSpec(RsmError, ValueError):
    category = "InvalidSpec"
    exit_code = 2


class DomainError(RsmError, ValueError):
    category = "DomainError"
    exit_code = 2


class InfeasiblePlan(RsmError, ValueError):
    category = "InfeasiblePlan"
    exit_code = 2


class UnsupportedNorm(RsmError, ValueError):
    category = "UnsupportedNorm"
    exit_code = 2


class EmptyMask(RsmError, ValueError):
    category = "EmptyMask"
    exit_code = 2


class DimensionMismatch(RsmError, ValueError):
    category = "DimensionMismatch"
    exit_code = 2


class IndexOutOfRange(RsmError, IndexError):
    category = "IndexOutOfRange"
    exit_code = 2


class DegenerateSubmatrix(RsmError, ValueError):
    category = "DegenerateSubmatrix"


class InsufficientCoverage(RsmError, RuntimeError):
    """The accumulated constraints do not pin down an r-dimensional subspace."""

    category = "InsufficientCoverage"
    exit_code = 4


class ParseError(RsmError, ValueError):
    category = "ParseError"
    exit_code = 3


class IoError(RsmError, OSError):
    category = "IoError"
    exit_code = 3

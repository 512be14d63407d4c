"""Exception hierarchy shared by the library and the cli.

Each class carries the process exit code the cli maps it to.
"""
from typing import Optional


class TreemonoError(Exception):
    """Base class for all library errors"""
    exit_code = 2


class ArgumentError(TreemonoError, ValueError):
    """Bad letter, degree mismatch, malformed cycle or parameter"""
    exit_code = 2


class PortraitParseError(TreemonoError):
    """Portrait DSL error with a 1-based source position"""
    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None:
            location = f"line {line}" if column is None else f"line {line}, column {column}"
            message = f"{location}: {message}"
        super().__init__(message)


class UnsupportedInputError(TreemonoError):
    """Input outside the fragment the library can represent"""
    exit_code = 2


class DomainViolation(TreemonoError):
    """Input is well formed but violates a domain condition such as (Y)"""
    exit_code = 1

    def __init__(self, message: str, violations: Optional[list] = None):
        super().__init__(message)
        self.violations = list(violations or [])


class ProcedureFailure(TreemonoError):
    """A constructive procedure could not finish: a counterexample"""
    exit_code = 3

    def __init__(self, message: str, witness: Optional[dict] = None):
        super().__init__(message)
        self.witness = witness


class ResourceCapError(TreemonoError):
    """Requested level is above the active cap"""
    exit_code = 4

    def __init__(self, message: str, level: Optional[int] = None, cap: Optional[int] = None):
        super().__init__(message)
        self.level = level
        self.cap = cap


def check_level(level: int, cap: int, what: str = "level") -> None:
    """Raise ArgumentError for negative levels and ResourceCapError above cap"""
    if level < 0:
        raise ArgumentError(f"{what} must be non-negative, got {level}")
    if level > cap:
        raise ResourceCapError(f"{what} {level} exceeds cap {cap}", level=level, cap=cap)

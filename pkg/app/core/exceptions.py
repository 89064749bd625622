# app/core/exceptions.py - Error hierarchy shared by every layer and mapped to CLI exit codes

from typing import Optional


class SoftOrderError(Exception):
    """Base error. exit_code is what the CLI returns when this escapes a command."""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DimensionError(SoftOrderError, ValueError):
    """Operand shapes do not agree"""


class ContractError(SoftOrderError, ValueError):
    """A documented precondition was violated by the caller"""


class GraphError(SoftOrderError, RuntimeError):
    """Computation graph is malformed (e.g. contains a cycle)"""


class NonFiniteError(SoftOrderError, FloatingPointError):
    """NaN or Inf found while CHECK_FINITE is enabled"""


class ConfigError(SoftOrderError):
    """Experiment config failed to parse or validate"""

    exit_code = 2


class DataFormatError(SoftOrderError):
    """Input file does not follow its declared format"""

    exit_code = 3

    def __init__(self, detail: str, field: Optional[str] = None):
        super().__init__(detail if field is None else f"{field}: {detail}")
        self.field = field


class MissingArtifactError(DataFormatError):
    """A run directory lacks an artifact a command needs"""


class SingularityError(SoftOrderError, ArithmeticError):
    """Zero trace encountered in the scaled trace chain"""

    exit_code = 4

    def __init__(self, detail: str, index: int):
        super().__init__(detail)
        self.index = index


def dimension_error(what: str, left, right) -> DimensionError:
    """Build a DimensionError naming both offending shapes"""
    return DimensionError(f"{what}: shape {tuple(left)} incompatible with {tuple(right)}")

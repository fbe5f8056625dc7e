from typing import List, Optional


class UdsApproxError(Exception):
    """Base class for every error raised by udsapprox."""

    exit_code: int = 3


class ParameterError(UdsApproxError, ValueError):
    """A parameter or hypothesis was violated before any computation started."""

    exit_code = 2


class ConfigError(ParameterError):
    """An experiment config failed validation. Holds every message, not just the first."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("config: " + "; ".join(self.errors))


class SequenceParseError(ParameterError):
    """A sequence file line could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"sequences: line {line}: " if line is not None else "sequences: "
        super().__init__(prefix + message)


class CoordinateRangeError(SequenceParseError):
    pass


class DimensionMismatchError(SequenceParseError):
    pass


class IndexRangeError(UdsApproxError, IndexError):
    """A prefix length, block index or window exceeds the available data."""


class GuardError(UdsApproxError):
    """An exact computation would exceed its work or resolution guard."""


class HorizonError(GuardError):
    pass


class EmptyScheduleError(GuardError):
    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ComputationError(UdsApproxError):
    """An internal consistency check failed."""

"""Error types and diagnostic records shared by all modules."""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CAPABILITY = 4


class Severity(Enum):
    """Severity levels for diagnostics."""

    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass
class Diagnostic:
    """A non-fatal finding attached to a result (tie, NaN fallback, ...)."""

    code: str
    message: str
    severity: Severity = Severity.WARNING
    location: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        result: dict[str, Any] = {"code": self.code, "msg": self.message}
        if self.location:
            result["at"] = self.location
        return result

    def __str__(self) -> str:
        location = f"{self.location}: " if self.location else ""
        return f"{location}{self.severity.value}: {self.message} [{self.code}]"


class PufEntropyError(Exception):
    """Base class for all errors raised by puf_entropy."""

    code = "E000"
    exit_code = EXIT_DATA

    def __init__(self, message: str, location: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.location = location

    def to_dict(self) -> dict[str, Any]:
        result: dict[str, Any] = {"code": self.code, "msg": self.message}
        if self.location:
            result["at"] = self.location
        return result

    def __str__(self) -> str:
        if self.location:
            return f"{self.location}: {self.message}"
        return self.message


class ConfigError(PufEntropyError):
    """Invalid configuration value or unresolvable name."""

    code = "E200"
    exit_code = EXIT_CONFIG


class ParameterError(PufEntropyError):
    """Invalid parameters for a code or an estimator."""

    code = "E210"
    exit_code = EXIT_CONFIG


class DataError(PufEntropyError):
    """Input data could not be used."""

    code = "E300"
    exit_code = EXIT_DATA


class ParseError(DataError):
    """Malformed numeric token; location is "row R, column C" (1-based)."""

    code = "E301"


class ShapeError(DataError):
    """Empty, ragged or otherwise mis-shaped input."""

    code = "E302"


class CapabilityError(PufEntropyError):
    """Exact computation infeasible for the requested parameters."""

    code = "E400"
    exit_code = EXIT_CAPABILITY


__all__ = [
    "CapabilityError",
    "ConfigError",
    "DataError",
    "Diagnostic",
    "EXIT_CAPABILITY",
    "EXIT_CONFIG",
    "EXIT_DATA",
    "EXIT_OK",
    "ParameterError",
    "ParseError",
    "PufEntropyError",
    "Severity",
    "ShapeError",
]

"""Exception hierarchy shared by every rpipe module.

Validators report problems instead of raising; everything else raises one of
these so callers (CLI, Temporal activities) can map failures to exit codes or
non-retryable application errors.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from rpipe.ir.validate import ValidationReport


class RpipeError(Exception):
    """Base class for all expected failures."""


class ArtifactSyntaxError(RpipeError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ArtifactSchemaError(RpipeError):
    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class ValidationFailed(RpipeError):
    def __init__(self, what: str, report: "ValidationReport") -> None:
        first = report.errors()[0] if report.errors() else None
        detail = f": [{first.node}] {first.code}: {first.message}" if first else ""
        super().__init__(f"{what} failed validation{detail}")
        self.report = report


class ParameterError(RpipeError):
    """Generator parameters that cannot produce a valid architecture."""


class PrefixOverflowError(RpipeError):
    pass


class PacketError(RpipeError, ValueError):
    """A packet the parser cannot accept."""


class UnknownBuiltinError(RpipeError):
    pass


class EncodeError(RpipeError):
    """The program cannot be matched structurally; no solving needed."""


class ConfigError(RpipeError):
    """A runtime configuration does not fit its architecture."""


class SolverTimeout(RpipeError):
    pass


class InconsistentAssignmentError(RpipeError):
    """A satisfying assignment violates an encoding invariant (encoder bug)."""

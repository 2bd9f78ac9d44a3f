"""Exception hierarchy shared by the microsense modules."""

from __future__ import annotations


class MicrosenseError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(MicrosenseError, ValueError):
    """Scenario document could not be parsed."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{where}{message}")


class ParamsValidationError(MicrosenseError, ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid scenario: " + "; ".join(self.violations))


class GridError(MicrosenseError, ValueError):
    pass


class FieldSolveError(MicrosenseError, RuntimeError):
    """The concentration solve did not reach the requested residual."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


class DomainError(MicrosenseError, ValueError):
    """A position lies outside the vessel or the solved grid."""

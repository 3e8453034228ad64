"""Exception hierarchy shared by every component.

Library code raises these; only ``app.py`` turns them into exit codes.
"""
from typing import Any, Dict, Optional


class MIWError(Exception):
    """Base class for all toolkit errors."""


class DomainError(MIWError, ValueError):
    """An argument lies outside the domain of the operation."""


class SolverError(MIWError, RuntimeError):
    """The ground-state shooting solver could not produce a configuration."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({details})"


class DivergedError(SolverError):
    """The forward recursion produced a non-finite value."""


class BracketError(SolverError):
    """The shooting objective does not change sign across the bracket."""


class QuadratureError(MIWError, ArithmeticError):
    """Adaptive quadrature or an iterative expansion failed to converge."""


class CacheError(MIWError):
    """A cache entry is unreadable or does not match its key."""

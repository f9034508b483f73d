"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class AgingCostError(Exception):
    """Base class for package errors."""


class ValidationError(AgingCostError, ValueError):
    """Bad input: out-of-domain values, malformed files, inconsistent parameters."""


class DomainError(ValidationError):
    """A scalar argument lies outside the domain of the function."""


class NonConvexStressError(ValidationError):
    """Stress function is not convex, so the segment costs would not be ordered."""


class InfeasibleError(AgingCostError):
    """A dispatch or optimization problem has no feasible solution."""

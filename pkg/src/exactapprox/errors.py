"""Error types raised across the package.

Each error carries a short machine-readable ``code`` so the CLI can map it to
an exit status without string matching.
"""

from __future__ import annotations


class ExactApproxError(Exception):
    code = "ERROR"


class DomainError(ExactApproxError):
    """Argument outside the domain where a function is defined."""

    code = "DOMAIN"


class NonSeparable(ExactApproxError):
    """Interval evaluation could not separate two distinct reals."""

    code = "NON_SEPARABLE"


class ZeroVector(ExactApproxError):
    code = "ZERO_VECTOR"


class PreconditionViolated(ExactApproxError):
    code = "PRECONDITION_VIOLATED"


class InternalError(ExactApproxError):
    """A guarantee that should hold by construction failed to hold."""

    code = "INTERNAL"


class Infeasible(ExactApproxError):
    """No admissible choice exists within the configured limits.

    ``predicate`` names the condition that could not be satisfied.
    """

    code = "INFEASIBLE"

    def __init__(self, message: str, predicate: str | None = None):
        super().__init__(message)
        self.predicate = predicate


class WitnessOutOfCube(Infeasible):
    code = "WITNESS_OUT_OF_CUBE"


class SimplexViolation(ExactApproxError):
    code = "SIMPLEX_VIOLATION"


class ConfigError(ExactApproxError):
    code = "CONFIG"

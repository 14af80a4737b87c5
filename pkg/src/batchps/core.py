"""Queue parameters, evaluation configuration and shared result types.

Everything downstream operates on a validated :class:`QueueParams`; the
constructor enforces stability, so an instance is proof of validity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class BatchPSError(Exception):
    """Base class for all errors raised by this package."""


class InstabilityError(BatchPSError, ValueError):
    """Parameters violate positivity/stability bounds."""


class BranchCutError(BatchPSError):
    """Evaluation requested on the branch cut without choosing a side."""


class DomainError(BatchPSError):
    """Argument at (or too close to) a pole, zero or excluded point."""


class SolverError(BatchPSError):
    """Iterative solver failed to converge."""


class QuadratureError(BatchPSError):
    """Adaptive quadrature could not reach the requested tolerance."""


class AccuracyError(BatchPSError):
    """Result error bound exceeds the requested tolerance."""


class TruncationError(BatchPSError):
    """State-space truncation leaves too much probability mass."""


class CapacityError(BatchPSError):
    """Simulation exceeded its event budget."""


class PoleOnCutWarning(UserWarning):
    """A pole lies inside the branch cut; error accounting is degraded."""


@dataclass(frozen=True)
class QueueParams:
    """Stable parameter pair (rho, q).

    rho is the batch arrival rate (batches per unit service time) and q the
    geometric batch-size parameter, P(B=b) = (1-q) q^(b-1).  Stability
    requires rho + q < 1, equivalently offered load rho/(1-q) < 1.
    """

    rho: float
    q: float

    def __post_init__(self):
        if not (self.rho > 0.0):
            raise InstabilityError(f"rho must be > 0, got rho={self.rho}")
        if not (0.0 < self.q < 1.0):
            raise InstabilityError(f"q must lie in the open interval (0, 1), got q={self.q}")
        if not (self.rho + self.q < 1.0):
            raise InstabilityError(
                f"stability requires rho + q < 1, got rho + q = {self.rho + self.q}"
            )

    @property
    def load(self) -> float:
        """Offered load rho/(1-q); < 1 for any valid instance."""
        return self.rho / (1.0 - self.q)

    @property
    def r(self) -> float:
        """sqrt(rho (1-q)), the half-width scale of the branch cut."""
        return math.sqrt(self.rho * (1.0 - self.q))


def validate_params(rho: float, q: float) -> QueueParams:
    """Validate (rho, q) and return an immutable QueueParams.

    Raises InstabilityError naming the violated bound.
    """
    return QueueParams(float(rho), float(q))


@dataclass(frozen=True)
class EvalConfig:
    """Numerical tolerances shared by the transform and inversion machinery."""

    quad_rel_tol: float = 1e-9
    quad_abs_tol: float = 1e-14
    inner_tol_factor: float = 1e-2
    max_subdivisions: int = 2000
    newton_tol: float = 1e-13
    newton_max_iter: int = 100

    def __post_init__(self):
        for name in ("quad_rel_tol", "quad_abs_tol", "inner_tol_factor", "newton_tol"):
            if not (getattr(self, name) > 0.0):
                raise ValueError(f"{name} must be strictly positive")
        if self.inner_tol_factor > 1.0:
            raise ValueError("inner_tol_factor must be <= 1")
        if self.max_subdivisions < 1 or self.newton_max_iter < 1:
            raise ValueError("iteration limits must be >= 1")


CCDF_METHODS = ("simulation", "bromwich", "branchcut", "asymptotic")


@dataclass(frozen=True)
class CcdfPoint:
    """One point (x, estimate) of a CCDF or density, tagged with its source."""

    x: float
    value: float
    method: str
    half_width: float = 0.0

    def __post_init__(self):
        if self.x < 0.0:
            raise ValueError("x must be >= 0")
        if self.half_width < 0.0:
            raise ValueError("half_width must be >= 0")
        if self.method not in CCDF_METHODS:
            raise ValueError(f"method must be one of {CCDF_METHODS}")


DEFAULT_CONFIG = EvalConfig()

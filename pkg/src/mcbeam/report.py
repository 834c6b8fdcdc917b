"""Solver status reporting."""
from __future__ import annotations

from dataclasses import dataclass, field

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITER_LIMIT = "iter_limit"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolverReport:
    """Outcome of a solver call.

    status      one of OPTIMAL / INFEASIBLE / ITER_LIMIT / NUMERICAL_FAILURE
    iterations  total iteration count (Newton steps, IPM iterations, ...)
    gap         certified optimality gap at exit (solver-specific scale)
    residual    feasibility / fixed-point residual at exit
    objective   objective value at the returned point
    trajectory  per-stage or per-iteration progress records
    wall_ms     wall-clock time spent inside the solve, milliseconds
    extra       solver-specific diagnostics
    """

    status: str
    iterations: int = 0
    gap: float = float("nan")
    residual: float = float("nan")
    objective: float = float("nan")
    trajectory: list = field(default_factory=list)
    wall_ms: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

"""Convex QCQP solver: log-barrier method with damped Newton steps.

Problems are real (complex data enters through the [Re; Im] lift):

    minimize    x^T Q0 x + 2 q0^T x + c0
    subject to  x^T Qm x + 2 qm^T x + cm <= 0,   m = 1..M

with every Qm positive semidefinite.  Dimensions here are at most a few
hundred, so dense factorizations throughout.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch
from .linalg import single_threaded_blas
from .report import (
    INFEASIBLE,
    ITER_LIMIT,
    NUMERICAL_FAILURE,
    OPTIMAL,
    SolverReport,
)

MU_FACTOR = 10.0  # barrier parameter multiplier per outer stage


@dataclass
class ConvexQcqp:
    """Convex quadratically constrained quadratic program (real-lifted).

    constraints is a list of (Q, q, c) triples meaning
    x^T Q x + 2 q^T x + c <= 0.
    """

    n: int
    Q0: np.ndarray
    q0: np.ndarray
    c0: float = 0.0
    constraints: list = field(default_factory=list)

    def validate(self) -> None:
        if self.Q0.shape != (self.n, self.n) or self.q0.shape != (self.n,):
            raise DimensionMismatch("objective data does not match dimension n")
        for i, (Q, q, c) in enumerate(self.constraints):
            if Q.shape != (self.n, self.n) or q.shape != (self.n,):
                raise DimensionMismatch(f"constraint {i} does not match dimension n")
            # PSD check by attempted factorization with a tiny shift
            shift = 1e-12 * max(1.0, float(np.abs(Q).max()))
            try:
                sla.cholesky(Q + shift * np.eye(self.n), lower=True)
            except sla.LinAlgError as exc:
                raise ValueError(f"constraint {i} matrix is not PSD") from exc

    def objective(self, x: np.ndarray) -> float:
        return float(x @ self.Q0 @ x + 2.0 * self.q0 @ x + self.c0)

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        vals = np.empty(len(self.constraints))
        for m, (Q, q, c) in enumerate(self.constraints):
            vals[m] = x @ Q @ x + 2.0 * q @ x + c
        return vals

    def scale(self) -> float:
        s = max(1.0, abs(self.c0))
        for Q, q, c in self.constraints:
            s = max(s, abs(c))
        return s


def _newton_center(p: ConvexQcqp, x: np.ndarray, t: float, max_steps: int = 60):
    """Damped Newton on the barrier-augmented objective at parameter t.

    Returns (x, newton_steps, ok).  x stays strictly feasible throughout.
    """
    n = p.n
    steps = 0
    for _ in range(max_steps):
        f = p.constraint_values(x)
        if np.any(f >= 0):  # should not happen; bail to caller
            return x, steps, False
        grad = 2.0 * t * (p.Q0 @ x + p.q0)
        hess = 2.0 * t * p.Q0.copy()
        for (Q, q, c), fm in zip(p.constraints, f):
            gm = 2.0 * (Q @ x + q)
            inv = 1.0 / (-fm)
            grad += inv * gm
            hess += inv * (2.0 * Q) + np.outer(gm, gm) * inv * inv
        try:
            cf = sla.cho_factor(hess, lower=True, check_finite=False)
        except sla.LinAlgError:
            hess += 1e-10 * max(1.0, np.trace(hess) / n) * np.eye(n)
            try:
                cf = sla.cho_factor(hess, lower=True, check_finite=False)
            except sla.LinAlgError:
                return x, steps, False
        dx = -sla.cho_solve(cf, grad, check_finite=False)
        decrement = float(-grad @ dx)
        steps += 1
        if decrement / 2.0 <= 1e-10:
            return x, steps, True
        # backtracking line search, keeping strict feasibility
        alpha = 1.0
        phi0 = t * p.objective(x) - np.sum(np.log(-f))
        for _ in range(60):
            xn = x + alpha * dx
            fn = p.constraint_values(xn)
            if np.all(fn < 0):
                phin = t * p.objective(xn) - np.sum(np.log(-fn))
                if phin <= phi0 - 0.01 * alpha * decrement:
                    break
            alpha *= 0.5
        else:
            return x, steps, True  # no progress possible at this scale
        x = xn
    return x, steps, True


def _phase_one(p: ConvexQcqp, tol: float):
    """Minimize a single slack s over {f_m(x) <= s}; returns (x, s, steps).

    Stops early once a point with comfortably negative slack is found.
    """
    n = p.n
    aug_cons = []
    for Q, q, c in p.constraints:
        Qa = np.zeros((n + 1, n + 1))
        Qa[:n, :n] = Q
        qa = np.concatenate([q, [-0.5]])
        aug_cons.append((Qa, qa, c))
    aug = ConvexQcqp(
        n=n + 1,
        Q0=np.zeros((n + 1, n + 1)),
        q0=np.concatenate([np.zeros(n), [0.5]]),  # objective = s
        c0=0.0,
        constraints=aug_cons,
    )
    x = np.zeros(n)
    s0 = float(np.max(p.constraint_values(x))) + 1.0
    z = np.concatenate([x, [s0]])
    scale = p.scale()
    total = 0
    t = 1.0 / max(1.0, abs(s0))
    m = len(aug_cons)
    for _ in range(80):
        z, steps, ok = _newton_center(aug, z, t)
        total += steps
        if not ok:
            break
        if z[-1] < -1e-6 * scale:  # strictly feasible point found
            break
        if m / t <= 0.1 * tol * scale:
            break
        t *= MU_FACTOR
    return z[:n], float(z[-1]), total


def solve_convex_qcqp(
    p: ConvexQcqp,
    x0: np.ndarray | None = None,
    tol: float = 1e-8,
    validate: bool = True,
) -> tuple[np.ndarray, SolverReport]:
    """Solve a convex QCQP by the barrier method.

    x0, when given, must be feasible; otherwise a phase-I problem
    (minimizing a single slack over all constraints) runs first.  On
    status OPTIMAL the duality measure M/t certifies the objective to
    within tol * scale.
    """
    t_start = time.perf_counter()
    if validate:
        p.validate()
    with single_threaded_blas():
        return _solve_inner(p, x0, tol, t_start)


def _solve_inner(p: ConvexQcqp, x0, tol: float, t_start: float):
    m = len(p.constraints)
    scale = p.scale()

    if m == 0:
        # unconstrained quadratic; minimize directly
        try:
            x = np.linalg.lstsq(2.0 * p.Q0, -2.0 * p.q0, rcond=None)[0]
        except np.linalg.LinAlgError:
            return np.zeros(p.n), SolverReport(status=NUMERICAL_FAILURE)
        rep = SolverReport(status=OPTIMAL, gap=0.0, residual=0.0,
                           objective=p.objective(x))
        rep.wall_ms = (time.perf_counter() - t_start) * 1e3
        return x, rep

    x = x0
    phase1_steps = 0
    if x is None or np.any(p.constraint_values(x) >= 0):
        x, slack, phase1_steps = _phase_one(p, tol)
        if slack > tol * scale or np.any(p.constraint_values(x) >= 0):
            rep = SolverReport(status=INFEASIBLE, iterations=phase1_steps,
                               residual=max(slack, 0.0))
            rep.wall_ms = (time.perf_counter() - t_start) * 1e3
            return x, rep

    total = phase1_steps
    trajectory = []
    t = max(1.0, m) / max(1.0, abs(p.objective(x)))
    status = ITER_LIMIT
    for _ in range(60):
        x, steps, ok = _newton_center(p, x, t)
        total += steps
        if not ok:
            status = NUMERICAL_FAILURE
            break
        trajectory.append(p.objective(x))
        if m / t <= tol * scale:
            status = OPTIMAL
            break
        t *= MU_FACTOR

    viol = float(np.max(p.constraint_values(x)))
    rep = SolverReport(
        status=status,
        iterations=total,
        gap=m / t,
        residual=max(viol, 0.0),
        objective=p.objective(x),
        trajectory=trajectory,
    )
    rep.wall_ms = (time.perf_counter() - t_start) * 1e3
    return x, rep

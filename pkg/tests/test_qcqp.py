import numpy as np
import pytest

from mcbeam.qcqp import ConvexQcqp, solve_convex_qcqp


def ball(center, radius_sq):
    n = center.shape[0]
    return (np.eye(n), -center, float(center @ center) - radius_sq)


def test_projection_onto_ball():
    c = np.array([1.0, 0.0])
    p = ConvexQcqp(n=2, Q0=np.eye(2), q0=np.zeros(2),
                   constraints=[ball(c, 0.25)])
    x, rep = solve_convex_qcqp(p)
    assert rep.ok
    assert np.allclose(x, [0.5, 0.0], atol=1e-5)
    assert abs(rep.objective - 0.25) <= 1e-6


def test_linear_objective_on_disk():
    p = ConvexQcqp(n=2, Q0=np.zeros((2, 2)), q0=np.array([0.5, 0.0]),
                   constraints=[(np.eye(2), np.zeros(2), -1.0)])
    x, rep = solve_convex_qcqp(p)
    assert rep.ok
    assert np.allclose(x, [-1.0, 0.0], atol=1e-5)


def test_infeasible_detected():
    p = ConvexQcqp(n=2, Q0=np.eye(2), q0=np.zeros(2),
                   constraints=[(np.eye(2), np.zeros(2), 1.0)])
    _, rep = solve_convex_qcqp(p)
    assert rep.status == "infeasible"


def test_rejects_indefinite_constraint():
    p = ConvexQcqp(n=2, Q0=np.eye(2), q0=np.zeros(2),
                   constraints=[(np.diag([1.0, -1.0]), np.zeros(2), -1.0)])
    with pytest.raises(ValueError):
        solve_convex_qcqp(p)


def random_instance(rng, n=4):
    """Bounded, strictly feasible random convex QCQP."""
    m0 = rng.standard_normal((n, n))
    q0 = rng.standard_normal(n)
    xc = 0.3 * rng.standard_normal(n)
    cons = [ball(xc, 2.0)]
    for _ in range(3):
        mm = rng.standard_normal((n, n))
        qm = 0.3 * rng.standard_normal(n)
        quad = 0.3 * mm.T @ mm
        cm = -(xc @ quad @ xc + 2 * qm @ xc) - rng.uniform(0.5, 1.5)
        cons.append((quad, qm, float(cm)))
    return ConvexQcqp(n=n, Q0=m0.T @ m0 + 0.5 * np.eye(n), q0=q0,
                      constraints=cons), xc


def grid_search(p, center, half_width, target_step, points=9, shrink=3.0):
    """Brute-force zooming grid; sound for convex feasible sets."""
    lo = center - half_width
    hi = center + half_width
    best_x, best_f = None, np.inf
    while True:
        axes = [np.linspace(lo[i], hi[i], points) for i in range(p.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        feas = np.ones(pts.shape[0], dtype=bool)
        for Q, q, c in p.constraints:
            vals = np.einsum("ij,jk,ik->i", pts, Q, pts) + 2 * pts @ q + c
            feas &= vals <= 1e-12
        if feas.any():
            objs = (np.einsum("ij,jk,ik->i", pts, p.Q0, pts)
                    + 2 * pts @ p.q0 + p.c0)
            objs[~feas] = np.inf
            k = int(np.argmin(objs))
            if objs[k] < best_f:
                best_f, best_x = float(objs[k]), pts[k]
        step = (hi - lo) / (points - 1)
        if np.max(step) <= target_step:
            return best_x, best_f
        center = best_x if best_x is not None else 0.5 * (lo + hi)
        half = (hi - lo) / (2.0 * shrink)
        # never let the box collapse faster than the step resolution
        half = np.maximum(half, 2 * step)
        lo, hi = center - half, center + half


@pytest.mark.parametrize("trial", range(10))
def test_grid_oracle_agreement(trial):
    rng = np.random.default_rng(900 + trial)
    p, xc = random_instance(rng)
    x, rep = solve_convex_qcqp(p)
    assert rep.ok
    _, f_grid = grid_search(p, center=xc, half_width=np.full(4, 2.0),
                            target_step=1e-3)
    assert abs(f_grid - rep.objective) <= 1e-2 * max(1.0, abs(f_grid))
    # the grid point is feasible, so it can only sit above the optimum
    assert f_grid >= rep.objective - 1e-6


def test_trajectory_monotone(rng):
    p, _ = random_instance(rng)
    _, rep = solve_convex_qcqp(p)
    t = np.array(rep.trajectory)
    assert np.all(np.diff(t) <= 1e-10 * (1.0 + np.abs(t[:-1])))


def test_phase_one_from_given_infeasible_start():
    # a given x0 outside the feasible set falls back to phase I
    p = ConvexQcqp(n=2, Q0=np.eye(2), q0=np.zeros(2),
                   constraints=[ball(np.array([2.0, 0.0]), 1.0)])
    x, rep = solve_convex_qcqp(p, x0=np.array([-5.0, 0.0]))
    assert rep.ok
    assert np.allclose(x, [1.0, 0.0], atol=1e-4)

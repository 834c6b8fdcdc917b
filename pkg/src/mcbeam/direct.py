"""Full-dimension baselines on the beamforming problem itself.

These operate on the stacked beamformer vectors rather than the
group-weight parameterization: a semidefinite relaxation over N x N blocks
(with Gaussian randomization) and convex-approximation descent from a
feasible point.  The relaxation's optimum is also exposed on its own as a
global lower bound; computed through an exact restriction to the span of
the user channels it stays cheap at any antenna count.
"""
from __future__ import annotations

import time

import numpy as np

from .errors import Infeasible, InfeasibleStart, RandomizationFailed
from .linalg import (
    herm,
    hermitize,
    lift_hermitian,
    lift_vector,
    orthonormal_range,
    unlift_vector,
)
from .qcqp import ConvexQcqp, solve_convex_qcqp
from .qos import SINR_SLACK, meets_targets, min_sinr_ratio, sinr, total_power
from .report import INFEASIBLE, ITER_LIMIT, OPTIMAL, SolverReport
from .scenario import ChannelSet, SystemConfig
from .sdp import SdpProblem, solve_sdp
from .weights import _apply_scaling, power_scaling_lp

DIRECT_N_CAP = 64  # full-dimension relaxation cost grows like (G N^2)^3


def _qos_sdp(H_groups: list, gamma: list, sigma2: float) -> SdpProblem:
    """Relaxation data over one PSD block per group (any ambient dimension)."""
    G = len(H_groups)
    n = H_groups[0].shape[0]
    A, r = [], []
    for i, Hi in enumerate(H_groups):
        gam = np.asarray(gamma[i], dtype=float)
        for k in range(Hi.shape[1]):
            h = Hi[:, k]
            Hh = np.outer(h, h.conj())
            row = []
            for j in range(G):
                if j == i:
                    row.append(hermitize(Hh / gam[k]))
                else:
                    row.append(hermitize(-Hh))
            A.append(row)
            r.append(sigma2)
    C = [np.eye(n, dtype=complex) for _ in range(G)]
    return SdpProblem(block_sizes=[n] * G, C=C, A=A, r=np.asarray(r))


def qos_sdr_lower_bound(ch: ChannelSet, cfg: SystemConfig,
                        gamma: list | None = None,
                        tol: float = 1e-7) -> tuple[float, SolverReport]:
    """Optimal value of the relaxed QoS problem; a bound on every feasible power.

    Every optimal relaxation block has its range inside the span of the
    user channels (any mass outside it leaves the constraints untouched
    and only adds power), so the relaxation is solved exactly in that
    span's coordinates regardless of N.
    """
    gamma = cfg.gamma if gamma is None else gamma
    H = ch.stacked()
    if ch.N > ch.K_tot:
        U, _ = orthonormal_range(H)
        Hs = [herm(U) @ Hi for Hi in ch.H]
    else:
        Hs = ch.H
    prob = _qos_sdp(Hs, gamma, cfg.sigma2)
    _, _, rep = solve_sdp(prob, tol=tol)
    if rep.status == INFEASIBLE:
        raise Infeasible("QoS relaxation is infeasible")
    if not rep.ok:
        raise Infeasible(f"QoS relaxation failed: {rep.status}")
    return rep.objective, rep


def direct_sdr_qos(
    ch: ChannelSet,
    cfg: SystemConfig,
    n_rand: int = 300,
    seed: int = 0,
    n_cap: int = DIRECT_N_CAP,
    tol: float = 1e-7,
) -> tuple[list, float, SolverReport]:
    """Solve the relaxation over full N x N blocks and randomize to rank one.

    Deliberately works in the ambient dimension (capped at n_cap by
    default) so its cost reflects the direct approach; returns
    (beamformers, lower_bound, report) with lower_bound <= total power.
    """
    if ch.N > n_cap:
        raise ValueError(
            f"N={ch.N} exceeds the direct relaxation cap {n_cap}; "
            "raise n_cap to force a full-dimension solve"
        )
    t0 = time.perf_counter()
    prob = _qos_sdp(ch.H, cfg.gamma, cfg.sigma2)
    X, _, rep = solve_sdp(prob, tol=tol)
    if rep.status == INFEASIBLE:
        raise Infeasible("QoS relaxation is infeasible")
    if not rep.ok:
        raise Infeasible(f"QoS relaxation failed: {rep.status}")
    lower = rep.objective

    rng = np.random.Generator(np.random.Philox(int(seed)))
    roots, leads, rank_one = [], [], True
    for Xi in X:
        w_eig, v = np.linalg.eigh(hermitize(Xi))
        w_eig = np.clip(w_eig, 0.0, None)
        roots.append((v * np.sqrt(w_eig)) @ herm(v))
        leads.append(np.sqrt(w_eig[-1]) * v[:, -1])
        if w_eig[-2] > 1e-7 * max(w_eig[-1], 1e-300):
            rank_one = False
    candidates = [leads]
    if not rank_one:
        for _ in range(int(n_rand)):
            cand = []
            for root in roots:
                xi = rng.standard_normal(ch.N) + 1j * rng.standard_normal(ch.N)
                cand.append(root @ (xi / np.sqrt(2.0)))
            candidates.append(cand)

    best, best_cost = None, np.inf
    for cand in candidates:
        if any(np.linalg.norm(c) == 0 for c in cand):
            continue
        W = np.column_stack(cand)
        rec = [np.abs(herm(W) @ Hi) ** 2 for Hi in ch.H]
        costs = np.array([float(np.vdot(c, c).real) for c in cand])
        p = power_scaling_lp(rec, cfg.gamma, cfg.sigma2, costs)
        if p is None:
            continue
        scaled = _apply_scaling(cand, rec, cfg.gamma, cfg.sigma2, p)
        if scaled is None:
            continue
        cost = total_power(scaled)
        if cost < best_cost:
            best, best_cost = scaled, cost
    if best is None:
        raise RandomizationFailed(
            f"no feasible beamformer after {n_rand} randomizations"
        )
    out = SolverReport(
        status=OPTIMAL,
        iterations=rep.iterations,
        gap=rep.gap,
        objective=best_cost,
        extra={"lower_bound": lower},
    )
    out.wall_ms = (time.perf_counter() - t0) * 1e3
    return best, lower, out


def _direct_sca_subproblem(Hs: list, gamma: list, sigma2: float,
                           z: list) -> ConvexQcqp:
    """Convex surrogate of the power problem anchored at z (per-user rows)."""
    G = len(Hs)
    n = Hs[0].shape[0]
    dims2 = [2 * n] * G
    offs = np.concatenate([[0], np.cumsum(dims2)])
    ntot = int(offs[-1])
    Q0 = np.zeros((ntot, ntot))
    eye_l = lift_hermitian(np.eye(n, dtype=complex))
    for j in range(G):
        Q0[offs[j]:offs[j + 1], offs[j]:offs[j + 1]] = eye_l
    cons = []
    for i, Hi in enumerate(Hs):
        gam = np.asarray(gamma[i], dtype=float)
        for k in range(Hi.shape[1]):
            h = Hi[:, k]
            Hh_l = lift_hermitian(np.outer(h, h.conj()))
            Q = np.zeros((ntot, ntot))
            for j in range(G):
                if j != i:
                    Q[offs[j]:offs[j + 1], offs[j]:offs[j + 1]] = gam[k] * Hh_l
            proj = np.vdot(h, z[i])  # h^H z_i
            q = np.zeros(ntot)
            q[offs[i]:offs[i + 1]] = -lift_vector(h * proj)
            c = abs(proj) ** 2 + gam[k] * sigma2
            cons.append((Q, q, float(c)))
    return ConvexQcqp(n=ntot, Q0=Q0, q0=np.zeros(ntot), c0=0.0, constraints=cons)


def _interiorize_direct(Hs, gamma, sigma2, w, margin=1e-9):
    Wm = np.column_stack(w)
    need = 0.0
    for i, Hi in enumerate(Hs):
        p = np.abs(herm(Wm) @ Hi) ** 2
        gam = np.asarray(gamma[i], dtype=float)
        lhs = p[i] - gam * (p.sum(axis=0) - p[i])
        if np.any(lhs <= 0):
            raise InfeasibleStart("starting beamformers violate an SINR constraint")
        need = max(need, float((gam * sigma2 * (1.0 + margin) / lhs).max()))
    c = np.sqrt(max(1.0, need))
    return [c * wi for wi in w]


def direct_sca_qos(
    ch: ChannelSet,
    cfg: SystemConfig,
    z0: list,
    tol: float = 1e-6,
    max_iter: int = 100,
    subproblem_tol: float = 1e-9,
) -> tuple[list, SolverReport]:
    """Convex-approximation descent on the power problem from feasible z0.

    Every surrogate's optimum lies in the span of the user channels, so
    when N exceeds the user count the subproblems are posed in that span's
    coordinates; the iterates are unchanged.  The transmit power is
    nonincreasing across iterations.
    """
    t0 = time.perf_counter()
    if len(z0) != ch.G or any(z.shape != (ch.N,) for z in z0):
        raise InfeasibleStart("z0 must hold one length-N beamformer per group")
    if not meets_targets(z0, ch, cfg.gamma, cfg.sigma2):
        raise InfeasibleStart("z0 violates an SINR constraint")

    reduce = ch.N > ch.K_tot
    if reduce:
        U, _ = orthonormal_range(ch.stacked())
        Hs = [herm(U) @ Hi for Hi in ch.H]
        z = [herm(U) @ zi for zi in z0]
    else:
        Hs = ch.H
        z = [zi.copy() for zi in z0]

    def power_of(vecs):
        return float(sum(np.vdot(v, v).real for v in vecs))

    obj = power_of(z)
    trajectory = [obj]
    total = 0
    status = OPTIMAL
    for _ in range(max_iter):
        z_in = _interiorize_direct(Hs, cfg.gamma, cfg.sigma2, z)
        sub = _direct_sca_subproblem(Hs, cfg.gamma, cfg.sigma2, z_in)
        x0 = np.concatenate([lift_vector(v) for v in z_in])
        x, rep = solve_convex_qcqp(sub, x0=x0, tol=subproblem_tol, validate=False)
        total += rep.iterations
        if not rep.ok:
            status = rep.status
            break
        dim = Hs[0].shape[0]
        z_new, ofs = [], 0
        for _g in range(ch.G):
            z_new.append(unlift_vector(x[ofs:ofs + 2 * dim]))
            ofs += 2 * dim
        obj_new = power_of(z_new)
        if obj_new > obj:
            break
        drop = (obj - obj_new) / max(obj, 1e-300)
        z, obj = z_new, obj_new
        trajectory.append(obj)
        if drop <= tol:
            break
    else:
        status = ITER_LIMIT

    w = [U @ zi for zi in z] if reduce else z
    rep_out = SolverReport(status=status, iterations=total, objective=obj,
                           trajectory=trajectory)
    rep_out.wall_ms = (time.perf_counter() - t0) * 1e3
    return w, rep_out

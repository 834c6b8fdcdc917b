"""Reduced weight optimization and the structured QoS pipelines.

Fixing the multipliers turns the beamforming problem into a weight problem
over one K_i-vector per group: with G_i = R^{-1} H_i and f_jik = G_j^H h_ik,
both the power objective and every SINR constraint depend on the weights
only through K-dimensional inner products, so the solve cost is independent
of the antenna count.  Weights come from a semidefinite relaxation (with
Gaussian randomization) optionally refined by convex-approximation descent
seeded at the relaxation's output.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, InfeasibleStart, RandomizationFailed
from .linalg import (
    herm,
    hermitize,
    lift_hermitian,
    lift_vector,
    psd_sqrt,
    push_through_inverse,
    unlift_vector,
)
from .qcqp import ConvexQcqp, solve_convex_qcqp
from .qos import GroupWeights, StructuredSolution, finalize_solution, SINR_SLACK
from .report import INFEASIBLE, OPTIMAL, SolverReport
from .scenario import ChannelSet, SystemConfig
from .sdp import SdpProblem, solve_sdp

QOS_METHODS = ("opt-sdr", "opt-sca", "asym-sca")


@dataclass
class ReducedProblem:
    """Weight-problem data in per-group coordinates of size r_i <= K_i.

    f[j][i] holds the cross vectors f_jik as columns (r_j x K_i); Q[j] is
    the Gram matrix of G_j (power per unit weight); mapback[i] sends the
    solved coordinates back to channel weights a_i.  cov_weights records
    the per-user diagonal of the covariance used to build the data.
    """

    dims: list
    Q: list
    f: list
    gamma: list
    sigma2: float
    Gmat: list
    mapback: list
    cov_weights: np.ndarray
    basis: dict | None = None

    @property
    def G(self) -> int:
        return len(self.dims)

    def to_channel_weights(self, b: list) -> list:
        return [m @ bi if m is not None else bi.copy()
                for m, bi in zip(self.mapback, b)]

    def power(self, a: list) -> float:
        return float(sum((np.vdot(ai, Qi @ ai)).real
                         for ai, Qi in zip(a, self.Q)))

    def received_powers(self, a: list) -> list:
        """per group i: (G x K_i) matrix of |a_j^H f_jik|^2."""
        out = []
        for i in range(self.G):
            rows = [np.abs(herm(self.f[j][i]) @ a[j]) ** 2 for j in range(self.G)]
            out.append(np.vstack(rows))
        return out

    def sinr(self, a: list) -> list:
        out = []
        for i, p in enumerate(self.received_powers(a)):
            num = p[i]
            den = p.sum(axis=0) - p[i] + self.sigma2
            out.append(num / den)
        return out

    def min_ratio(self, a: list) -> float:
        return float(min((s / g).min() for s, g in zip(self.sinr(a), self.gamma)))


def reduced_problem_from_cov_weights(
    ch: ChannelSet, d_flat: np.ndarray, gamma: list, sigma2: float,
    use_basis_reduction: bool = False,
) -> ReducedProblem:
    """Build the weight-problem data for covariance I + sum d_u h_u h_u^H."""
    H = ch.stacked()
    gram = herm(H) @ H
    E = push_through_inverse(gram, np.asarray(d_flat, dtype=float))
    F_full = herm(E) @ gram          # F_full[u, v] = (R^{-1} h_u)^H h_v
    Q_full = herm(E) @ gram @ E      # Gram of R^{-1} H
    Gmat_full = H @ E
    slices = ch.group_slices()

    mapback: list = [None] * ch.G
    basis = None
    if use_basis_reduction:
        from .linalg import orthonormal_range

        basis = {"U": [], "r": []}
        transforms = []
        for Hi in ch.H:
            u, s, vh = np.linalg.svd(Hi, full_matrices=False)
            r = max(1, int(np.sum(s > 1e-10 * s[0])))
            basis["U"].append(u[:, :r])
            basis["r"].append(r)
            transforms.append(herm(vh[:r]) / s[:r][None, :])  # T: a = T b
        mapback = transforms

    dims, Q, f, Gmat = [], [], [], []
    for i, sl in enumerate(slices):
        Ti = mapback[i]
        Qi = hermitize(Q_full[sl, sl])
        Gi = Gmat_full[:, sl]
        if Ti is not None:
            Qi = hermitize(herm(Ti) @ Qi @ Ti)
            Gi = Gi @ Ti
        dims.append(Qi.shape[0])
        Q.append(Qi)
        Gmat.append(Gi)
    for j, slj in enumerate(slices):
        row = []
        Tj = mapback[j]
        for i, sli in enumerate(slices):
            fji = F_full[slj, sli]
            if Tj is not None:
                fji = herm(Tj) @ fji
            row.append(fji)
        f.append(row)
    return ReducedProblem(
        dims=dims, Q=Q, f=f,
        gamma=[np.asarray(g, dtype=float) for g in gamma],
        sigma2=float(sigma2), Gmat=Gmat, mapback=mapback,
        cov_weights=np.asarray(d_flat, dtype=float), basis=basis,
    )


def build_reduced_problem(
    ch: ChannelSet, lam: list, gamma: list, sigma2: float,
    use_basis_reduction: bool | None = None,
) -> ReducedProblem:
    """Weight-problem data for the multiplier covariance R(lam).

    Basis reduction replaces each group's channel matrix by an orthonormal
    basis of its column space (dimension r_i = rank H_i); by default it is
    enabled when N exceeds the group sizes.
    """
    if use_basis_reduction is None:
        use_basis_reduction = ch.N > max(ch.K)
    lam_flat = np.concatenate([np.asarray(l, dtype=float) for l in lam])
    gflat = np.concatenate([np.asarray(g, dtype=float) for g in gamma])
    if np.any(lam_flat < 0):
        raise ValueError("multipliers must be nonnegative")
    return reduced_problem_from_cov_weights(
        ch, lam_flat * gflat, gamma, sigma2, use_basis_reduction
    )


def power_scaling_lp(
    rec: list, gamma: list, sigma2: float, costs: np.ndarray,
    tol: float = 1e-13, max_iter: int = 5000,
) -> np.ndarray | None:
    """Minimum-cost group power scalars restoring every SINR constraint.

    rec[i] is the (G x K_i) matrix of received powers at group i's users
    from each group's candidate; costs[j] is the transmit power of
    candidate j at unit scale.  Solves the linear program

        min costs^T p   s.t.  p_i rec[i][i,k] >=
            gamma_ik (sum_{j!=i} p_j rec[i][j,k] + sigma2),  p >= 0

    through the interference map p_i <- max_k gamma_ik (cross_k + sigma2)
    / own_k, whose iteration from zero climbs to the feasible set's least
    element; positive costs make that element the unique LP optimum.
    Returns None when the iteration diverges (no feasible p).
    """
    G = len(rec)
    gammas = [np.asarray(g, dtype=float) for g in gamma]
    owns = [np.asarray(r[i], dtype=float) for i, r in enumerate(rec)]
    if any((o <= 0).any() for o in owns):
        return None
    bound = 1e14 * sigma2 * max(
        float(np.max(g / o)) for g, o in zip(gammas, owns)
    )
    p = np.zeros(G)
    for _ in range(max_iter):
        p_new = np.empty(G)
        for i, r in enumerate(rec):
            cross = p @ r - p[i] * r[i]
            p_new[i] = float((gammas[i] * (cross + sigma2) / owns[i]).max())
        if not np.isfinite(p_new).all() or p_new.max() > bound:
            return None
        if np.abs(p_new - p).max() <= tol * max(1.0, p_new.max()):
            return p_new
        p = p_new
    return None


def _apply_scaling(a: list, rec: list, gamma: list, sigma2: float,
                   p: np.ndarray) -> list:
    """Scale candidates by sqrt(p), inflating uniformly if roundoff bites."""
    need = 1.0
    for i, pm in enumerate(rec):
        gam = np.asarray(gamma[i], dtype=float)
        own = p[i] * pm[i]
        other = (p[:, None] * pm).sum(axis=0) - own
        lhs = own - gam * other
        bad = lhs < gam * sigma2
        if np.any(bad):
            pos = lhs[bad]
            if np.any(pos <= 0):
                return None
            need = max(need, float((gam[bad] * sigma2 / pos).max()))
    p = p * need * (1.0 + 1e-12)
    return [np.sqrt(p[j]) * aj for j, aj in enumerate(a)]


def randomize_and_scale(
    X: list, rp: ReducedProblem, n_rand: int = 300, seed: int = 0
) -> GroupWeights:
    """Extract feasible weights from PSD blocks by Gaussian randomization.

    Draws a_j ~ CN(0, X_j) jointly across groups, restores feasibility for
    each draw with the group-power LP, and keeps the cheapest feasible
    candidate.  The dominant eigenvector of each block always enters the
    candidate pool, which makes the rank-one case deterministic.
    """
    rng = np.random.Generator(np.random.Philox(int(seed)))
    roots, leads, rank_one = [], [], True
    for Xi in X:
        Xi = hermitize(Xi)
        w, v = np.linalg.eigh(Xi)
        w = np.clip(w, 0.0, None)
        roots.append((v * np.sqrt(w)) @ herm(v))
        leads.append(np.sqrt(w[-1]) * v[:, -1])
        if Xi.shape[0] > 1 and w[-2] > 1e-7 * max(w[-1], 1e-300):
            rank_one = False

    candidates = [leads]
    if not rank_one:
        for _ in range(int(n_rand)):
            cand = []
            for root, d in zip(roots, rp.dims):
                xi = (rng.standard_normal(d) + 1j * rng.standard_normal(d))
                cand.append(root @ (xi / np.sqrt(2.0)))
            candidates.append(cand)

    best, best_cost = None, np.inf
    for cand in candidates:
        if any(np.linalg.norm(c) == 0 for c in cand):
            continue
        rec = rp.received_powers(cand)
        costs = np.array([(np.vdot(c, Qj @ c)).real
                          for c, Qj in zip(cand, rp.Q)])
        p = power_scaling_lp(rec, rp.gamma, rp.sigma2, costs)
        if p is None:
            continue
        scaled = _apply_scaling(cand, rec, rp.gamma, rp.sigma2, p)
        if scaled is None:
            continue
        cost = rp.power(scaled)
        if cost < best_cost:
            best, best_cost = scaled, cost
    if best is None:
        raise RandomizationFailed(
            f"no feasible candidate after {n_rand} randomizations"
        )
    return GroupWeights(a=best)


def _sdr_problem(rp: ReducedProblem) -> SdpProblem:
    G = rp.G
    A, r = [], []
    for i in range(G):
        gam = rp.gamma[i]
        for k in range(gam.shape[0]):
            row = []
            for j in range(G):
                fj = rp.f[j][i][:, k]
                Fj = np.outer(fj, fj.conj())
                if j == i:
                    row.append(hermitize((1.0 / gam[k]) * Fj))
                else:
                    row.append(hermitize(-Fj))
            A.append(row)
            r.append(rp.sigma2)
    return SdpProblem(block_sizes=list(rp.dims), C=[Qi for Qi in rp.Q],
                      A=A, r=np.asarray(r))


def solve_weights_sdr(
    rp: ReducedProblem, n_rand: int = 300, seed: int = 0, tol: float = 1e-7
) -> tuple[GroupWeights, float, SolverReport]:
    """Relax the weight problem over X_i = a_i a_i^H, then randomize.

    Returns (weights, lower_bound, report); the bound is the relaxation's
    optimum, valid for the weight problem at these covariance weights.
    """
    t0 = time.perf_counter()
    prob = _sdr_problem(rp)
    X, _, rep = solve_sdp(prob, tol=tol)
    if rep.status == INFEASIBLE:
        raise Infeasible("weight-problem relaxation is infeasible at this covariance")
    if not rep.ok:
        raise Infeasible(f"weight-problem relaxation failed: {rep.status}")
    lower = rep.objective
    gw = randomize_and_scale(X, rp, n_rand=n_rand, seed=seed)
    out = SolverReport(
        status=OPTIMAL,
        iterations=rep.iterations,
        gap=rep.gap,
        residual=rep.residual,
        objective=rp.power(gw.a),
        extra={"lower_bound": lower, "sdp_wall_ms": rep.wall_ms},
    )
    out.wall_ms = (time.perf_counter() - t0) * 1e3
    return gw, lower, out


def _interiorize(rp: ReducedProblem, a: list, margin: float = 1e-9) -> list:
    """Scale candidates up slightly so every SINR constraint is strict."""
    need = 0.0
    for i, p in enumerate(rp.received_powers(a)):
        gam = rp.gamma[i]
        own = p[i]
        other = p.sum(axis=0) - own
        lhs = own - gam * other
        if np.any(lhs <= 0):
            raise InfeasibleStart("starting weights violate an SINR constraint")
        need = max(need, float((gam * rp.sigma2 * (1.0 + margin) / lhs).max()))
    c = np.sqrt(max(1.0, need))
    return [c * ai for ai in a]


def _sca_subproblem(rp: ReducedProblem, v: list) -> ConvexQcqp:
    dims2 = [2 * d for d in rp.dims]
    offs = np.concatenate([[0], np.cumsum(dims2)])
    n = int(offs[-1])
    Q0 = np.zeros((n, n))
    for j, Qj in enumerate(rp.Q):
        Q0[offs[j]:offs[j + 1], offs[j]:offs[j + 1]] = lift_hermitian(Qj)
    cons = []
    for i in range(rp.G):
        gam = rp.gamma[i]
        for k in range(gam.shape[0]):
            coef = 1.0 + 1.0 / gam[k]
            Q = np.zeros((n, n))
            for j in range(rp.G):
                fj = rp.f[j][i][:, k]
                Q[offs[j]:offs[j + 1], offs[j]:offs[j + 1]] = lift_hermitian(
                    np.outer(fj, fj.conj())
                )
            fi = rp.f[i][i][:, k]
            proj = np.vdot(fi, v[i])  # f^H v
            q = np.zeros(n)
            q[offs[i]:offs[i + 1]] = -coef * lift_vector(fi * proj)
            c = coef * abs(proj) ** 2 + rp.sigma2
            cons.append((Q, q, float(c)))
    return ConvexQcqp(n=n, Q0=Q0, q0=np.zeros(n), c0=0.0, constraints=cons)


def _split_lifted(rp: ReducedProblem, x: np.ndarray) -> list:
    out, ofs = [], 0
    for d in rp.dims:
        out.append(unlift_vector(x[ofs:ofs + 2 * d]))
        ofs += 2 * d
    return out


def solve_weights_sca(
    rp: ReducedProblem, v0: GroupWeights, tol: float = 1e-6,
    max_iter: int = 100, subproblem_tol: float = 1e-9,
) -> tuple[GroupWeights, SolverReport]:
    """Descend on the weight problem by successive convex approximation.

    v0 must be feasible (the relaxation output is).  Each round solves the
    convex surrogate anchored at the current point; the objective never
    increases, and iteration stops when the relative decrease drops below
    tol.
    """
    t0 = time.perf_counter()
    v = [np.asarray(ai, dtype=complex).copy() for ai in v0.a]
    if rp.min_ratio(v) < 1.0 - SINR_SLACK:
        raise InfeasibleStart("SCA starting weights are infeasible")
    obj = rp.power(v)
    trajectory = [obj]
    total_newton = 0
    status = OPTIMAL
    for _ in range(max_iter):
        v_in = _interiorize(rp, v)
        sub = _sca_subproblem(rp, v_in)
        x0 = np.concatenate([lift_vector(ai) for ai in v_in])
        x, rep = solve_convex_qcqp(sub, x0=x0, tol=subproblem_tol, validate=False)
        total_newton += rep.iterations
        if not rep.ok:
            status = rep.status
            break
        v_new = _split_lifted(rp, x)
        obj_new = rp.power(v_new)
        if obj_new > obj:  # inexact subproblem; keep the better point
            break
        drop = (obj - obj_new) / max(obj, 1e-300)
        v, obj = v_new, obj_new
        trajectory.append(obj)
        if drop <= tol:
            break
    else:
        from .report import ITER_LIMIT

        status = ITER_LIMIT
    out = SolverReport(status=status, iterations=total_newton, objective=obj,
                       trajectory=trajectory)
    out.wall_ms = (time.perf_counter() - t0) * 1e3
    return GroupWeights(a=v), out


def solve_qos(
    ch: ChannelSet,
    cfg: SystemConfig,
    method: str = "opt-sca",
    seed: int = 0,
    n_rand: int = 300,
    sca_tol: float = 1e-6,
    fp_tol: float = 1e-9,
    fp_max_iter: int = 500,
    use_basis_reduction: bool | None = None,
) -> tuple[StructuredSolution, SolverReport]:
    """End-to-end structured QoS solve.

    opt-sdr   multipliers by fixed point, weights by relaxation+randomization
    opt-sca   opt-sdr followed by convex-approximation descent
    asym-sca  closed-form large-array multipliers instead of the fixed point
    """
    if method not in QOS_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {QOS_METHODS}")
    from .multipliers import asymptotic_lambda, fixed_point_lambda

    t0 = time.perf_counter()
    extra = {}
    if method == "asym-sca":
        lam = asymptotic_lambda(ch.beta, cfg.gamma, ch.N)
        fp_iters = 0
    else:
        lam, fp_rep = fixed_point_lambda(ch, cfg.gamma, tol=fp_tol,
                                         max_iter=fp_max_iter)
        if not fp_rep.ok:
            raise Infeasible("multiplier fixed point did not converge")
        fp_iters = fp_rep.iterations
        extra["lambda_residual"] = fp_rep.residual
    rp = build_reduced_problem(ch, lam, cfg.gamma, cfg.sigma2,
                               use_basis_reduction=use_basis_reduction)
    gw, lower, sdr_rep = solve_weights_sdr(rp, n_rand=n_rand, seed=seed)
    iters = fp_iters + sdr_rep.iterations
    if method in ("opt-sca", "asym-sca"):
        gw, sca_rep = solve_weights_sca(rp, gw, tol=sca_tol)
        iters += sca_rep.iterations
        extra["sca_trajectory"] = sca_rep.trajectory
    a = rp.to_channel_weights(gw.a)
    sol = finalize_solution(lam, a, ch, cfg.gamma, cfg.sigma2, basis=rp.basis)
    # tolerance-level violations are repaired by a uniform upscale, which
    # raises every SINR (solve c^2 num - g (c^2 interf + sigma2) >= 0)
    if sol.metrics["min_sinr_ratio"] < 1.0 - SINR_SLACK:
        from .qos import min_sinr_ratio, total_power

        W = np.column_stack(sol.w)
        c2 = 1.0
        for i, g in enumerate(cfg.gamma):
            p = np.abs(herm(W) @ ch.H[i]) ** 2
            denom = p[i] - g * (p.sum(axis=0) - p[i])
            if not (denom > 0).all():
                raise Infeasible("assembled beamformers cannot be rescaled to targets")
            c2 = max(c2, float((g * cfg.sigma2 / denom).max()) * (1.0 + 1e-12))
        sol.w = [np.sqrt(c2) * wi for wi in sol.w]
        sol.weights.a = [np.sqrt(c2) * ai for ai in sol.weights.a]
        sol.metrics["power"] = total_power(sol.w)
        sol.metrics["min_sinr_ratio"] = min_sinr_ratio(sol.w, ch, cfg.gamma,
                                                       cfg.sigma2)
    rep = SolverReport(
        status=OPTIMAL,
        iterations=iters,
        objective=sol.metrics["power"],
        residual=extra.get("lambda_residual", float("nan")),
        extra={**extra, "weight_lower_bound": lower, "method": method},
    )
    rep.wall_ms = (time.perf_counter() - t0) * 1e3
    return sol, rep

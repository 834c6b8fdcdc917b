"""Core model: SINR/power evaluation and the structured beamformer algebra.

The structured form writes each group beamformer as w_i = R(lam)^{-1} H_i a_i,
where R(lam) = I + sum_ik lam_ik gamma_ik h_ik h_ik^H is the noise plus
weighted channel covariance and a_i weights the group's user channels.
An equivalent interference-form uses the group-excluded covariance
R_i-(lam) with weights alpha_i = a_i / (1 + gamma_i); the two coincide for
mutually consistent (lam, a).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, Infeasible
from .linalg import herm, hermitian_solve, hermitize, orthonormal_range, push_through_inverse
from .report import ITER_LIMIT, OPTIMAL, SolverReport
from .scenario import ChannelSet, SystemConfig

# a SINR constraint counts as met when SINR >= gamma * (1 - SINR_SLACK)
SINR_SLACK = 1e-6


def _check_groups(ch: ChannelSet, vecs: list, name: str) -> None:
    if len(vecs) != ch.G:
        raise DimensionMismatch(f"{name} must have one entry per group")
    for h, v in zip(ch.H, vecs):
        if np.atleast_1d(v).shape[0] != h.shape[1]:
            raise DimensionMismatch(f"{name} entries must match group sizes")


def sinr(w: list, ch: ChannelSet, sigma2: float) -> list:
    """Per-user SINR: |w_i^H h_ik|^2 / (sum_{j!=i} |w_j^H h_ik|^2 + sigma2)."""
    if len(w) != ch.G:
        raise DimensionMismatch("one beamformer per group is required")
    for wi in w:
        if wi.shape != (ch.N,):
            raise DimensionMismatch("beamformer length must equal antenna count")
    W = np.column_stack(w)  # N x G
    out = []
    for i, Hi in enumerate(ch.H):
        p = np.abs(herm(W) @ Hi) ** 2  # G x K_i received powers
        num = p[i]
        den = p.sum(axis=0) - p[i] + sigma2
        out.append(num / den)
    return out


def total_power(w: list) -> float:
    """Sum of squared beamformer norms."""
    return float(sum(np.vdot(wi, wi).real for wi in w))


def min_sinr_ratio(w: list, ch: ChannelSet, gamma: list, sigma2: float) -> float:
    """min over users of SINR_ik / gamma_ik."""
    vals = sinr(w, ch, sigma2)
    return float(min((v / g).min() for v, g in zip(vals, gamma)))


def meets_targets(w: list, ch: ChannelSet, gamma: list, sigma2: float,
                  slack: float = SINR_SLACK) -> bool:
    return min_sinr_ratio(w, ch, gamma, sigma2) >= 1.0 - slack


def build_R(lam: list, ch: ChannelSet, gamma: list) -> np.ndarray:
    """Noise plus weighted channel covariance I + sum lam*gamma h h^H."""
    _check_groups(ch, lam, "lam")
    _check_groups(ch, gamma, "gamma")
    H = ch.stacked()
    d = np.concatenate([np.asarray(l) * np.asarray(g) for l, g in zip(lam, gamma)])
    if np.any(d < 0):
        raise ValueError("multipliers must be nonnegative")
    R = np.eye(ch.N, dtype=complex) + (H * d[None, :]) @ herm(H)
    return hermitize(R)


def build_R_minus(lam: list, ch: ChannelSet, gamma: list, i: int) -> np.ndarray:
    """Same as build_R with group i's own terms removed."""
    R = build_R(lam, ch, gamma)
    Hi = ch.H[i]
    d = np.asarray(lam[i]) * np.asarray(gamma[i])
    return hermitize(R - (Hi * d[None, :]) @ herm(Hi))


def assemble_beamformer(lam: list, a: list, ch: ChannelSet, gamma: list) -> list:
    """Beamformers from multipliers and group weights: solve R(lam) w_i = H_i a_i."""
    _check_groups(ch, a, "a")
    R = build_R(lam, ch, gamma)
    rhs = np.column_stack([Hi @ np.asarray(ai, dtype=complex)
                           for Hi, ai in zip(ch.H, a)])
    sol = hermitian_solve(R, rhs)
    return [sol[:, i] for i in range(ch.G)]


def assemble_beamformer_interference_form(lam: list, alpha: list, ch: ChannelSet,
                                          gamma: list) -> list:
    """Alternative assembly: w_i = R_i-(lam)^{-1} H_i alpha_i."""
    _check_groups(ch, alpha, "alpha")
    out = []
    for i in range(ch.G):
        Rm = build_R_minus(lam, ch, gamma, i)
        out.append(hermitian_solve(Rm, ch.H[i] @ np.asarray(alpha[i], dtype=complex)))
    return out


def power_identity(lam: list, gamma: list, sigma2: float) -> float:
    """sigma2 * lam^T gamma; equals the minimum transmit power at optimality."""
    return float(sigma2 * sum(np.asarray(l) @ np.asarray(g)
                              for l, g in zip(lam, gamma)))


def structure_residual(w: list, lam: list, ch: ChannelSet, gamma: list) -> np.ndarray:
    """Distance of each w_i from the span of R(lam)^{-1} H_i, relative scale.

    Zero means w_i fits the structured form exactly for these multipliers.
    """
    R = build_R(lam, ch, gamma)
    out = np.empty(ch.G)
    for i, (Hi, wi) in enumerate(zip(ch.H, w)):
        basis = hermitian_solve(R, Hi)
        u, _ = orthonormal_range(basis, tol=1e-12)
        resid = wi - u @ (herm(u) @ wi)
        out[i] = np.linalg.norm(resid) / max(np.linalg.norm(wi), 1e-300)
    return out


def duality_check(w: list, lam: list, ch: ChannelSet, gamma: list) -> np.ndarray:
    """Sine of the angle between w_i and its virtual-uplink receive beamformer.

    The comparison vector is R_i-(lam)^{-1} sum_k lam_ik (h_ik^H w_i) h_ik,
    the maximizer of the dual uplink SINR quotient; zero sine means w_i
    attains that form.  Scale invariant in w_i.
    """
    out = np.empty(ch.G)
    for i, (Hi, wi) in enumerate(zip(ch.H, w)):
        delta = herm(Hi) @ wi
        Rm = build_R_minus(lam, ch, gamma, i)
        v = hermitian_solve(Rm, Hi @ (np.asarray(lam[i]) * delta))
        out[i] = sine_angle(wi, v)
    return out


def sine_angle(w: np.ndarray, v: np.ndarray) -> float:
    """Sine of the angle between two vectors.

    Uses the orthogonal-component norm, which stays accurate near zero
    where 1 - cos^2 loses half the digits.
    """
    nw, nv = np.linalg.norm(w), np.linalg.norm(v)
    if nw == 0 or nv == 0:
        return 1.0
    resid = w - v * (np.vdot(v, w) / (nv * nv))
    return min(1.0, float(np.linalg.norm(resid) / nw))


@dataclass
class GroupWeights:
    """Group-channel weights a_i, with the derived alpha/delta when available.

    When all three are populated they satisfy alpha = a / (1 + gamma) and
    a = lam * delta * (1 + gamma) up to solver tolerance.
    """

    a: list
    alpha: list | None = None
    delta: list | None = None

    def relation_residual(self, lam: list, gamma: list) -> float:
        """max relative error in a = lam * delta * (1 + gamma)."""
        if self.delta is None:
            return float("nan")
        worst = 0.0
        for ai, li, di, gi in zip(self.a, lam, self.delta, gamma):
            pred = np.asarray(li) * np.asarray(di) * (1.0 + np.asarray(gi))
            scale = max(np.abs(ai).max(), 1e-300)
            worst = max(worst, float(np.abs(pred - ai).max() / scale))
        return worst


@dataclass
class StructuredSolution:
    """Multipliers, weights and the beamformers they generate."""

    lam: list
    weights: GroupWeights
    w: list
    basis: dict | None = None
    consistent: bool = False
    metrics: dict = field(default_factory=dict)


def finalize_solution(lam: list, a: list, ch: ChannelSet, gamma: list,
                      sigma2: float, basis: dict | None = None) -> StructuredSolution:
    """Assemble w from (lam, a), derive alpha/delta, and normalize phases.

    Each a_i (and w_i with it) is rotated so its first nonzero entry is
    real-positive; SINR and power are unchanged.
    """
    a = [np.asarray(ai, dtype=complex).copy() for ai in a]
    w = assemble_beamformer(lam, a, ch, gamma)
    for i, ai in enumerate(a):
        nz = np.flatnonzero(np.abs(ai) > 1e-14 * max(np.abs(ai).max(), 1e-300))
        if nz.size:
            rot = np.exp(-1j * np.angle(ai[nz[0]]))
            a[i] = ai * rot
            w[i] = w[i] * rot
    delta = [herm(Hi) @ wi for Hi, wi in zip(ch.H, w)]
    alpha = [ai / (1.0 + np.asarray(gi)) for ai, gi in zip(a, gamma)]
    gw = GroupWeights(a=a, alpha=alpha, delta=delta)
    sol = StructuredSolution(lam=[np.asarray(l, dtype=float) for l in lam],
                             weights=gw, w=w, basis=basis)
    sol.consistent = gw.relation_residual(lam, gamma) <= 1e-8
    sol.metrics = {
        "power": total_power(w),
        "min_sinr_ratio": min_sinr_ratio(w, ch, gamma, sigma2),
        "power_identity": power_identity(lam, gamma, sigma2),
    }
    return sol


def unicast_reference(ch: ChannelSet, gamma: list, sigma2: float,
                      tol: float = 1e-12, max_iter: int = 2000):
    """Classical single-user-per-group downlink solution via duality.

    Multipliers come from the fixed-point normalization, directions from
    the weighted-covariance inverse, and downlink powers from exact SINR
    equality.  Requires K_i = 1 for every group.
    """
    if any(k != 1 for k in ch.K):
        raise DimensionMismatch("unicast reference requires exactly one user per group")
    from .multipliers import fixed_point_lambda

    lam, rep = fixed_point_lambda(ch, gamma, tol=tol, max_iter=max_iter)
    if rep.status != OPTIMAL:
        raise Infeasible("multiplier fixed point did not converge")
    R = build_R(lam, ch, gamma)
    H = ch.stacked()
    U = hermitian_solve(R, H)
    U = U / np.linalg.norm(U, axis=0, keepdims=True)
    g = np.abs(herm(U) @ H) ** 2  # g[j, i] = |u_j^H h_i|^2
    gam = np.concatenate(gamma)
    A = -g.T.copy()
    np.fill_diagonal(A, np.diag(g) / gam)
    try:
        p = np.linalg.solve(A, np.full(ch.G, sigma2))
    except np.linalg.LinAlgError as exc:
        raise Infeasible("power coupling system is singular") from exc
    if np.any(p <= 0) or not np.isfinite(p).all():
        raise Infeasible("no positive power allocation meets all targets")
    w = [np.sqrt(p[i]) * U[:, i] for i in range(ch.G)]
    return w, lam, p


def consistent_structured_solution(ch: ChannelSet, gamma: list, seed: int = 0,
                                   tol: float = 1e-12, max_iter: int = 400):
    """Generate (lam, a) that satisfy the structured-optimality relations exactly.

    Starting from a random positive multiplier direction, each group's
    multipliers are rescaled until the group's weighted Gram map
    B_i(lam) diag(lam_i (1+gamma_i)) has top eigenvalue 1; its eigenvector
    then yields self-consistent weights (delta recomputed from the
    assembled w reproduces a).  Used to exercise the dual-form identities.
    """
    rng = np.random.Generator(np.random.Philox(int(seed)))
    H = ch.stacked()
    gram = herm(H) @ H
    gflat = np.concatenate(gamma)
    slices = ch.group_slices()
    lam_dir = np.exp(rng.uniform(-0.5, 0.5, size=ch.K_tot))
    c = np.ones(ch.G)
    mus = np.ones(ch.G)
    for _ in range(max_iter):
        lam_flat = lam_dir.copy()
        for i, sl in enumerate(slices):
            lam_flat[sl] *= c[i]
        E = push_through_inverse(gram, lam_flat * gflat)
        B = gram @ E  # H^H R^{-1} H in channel coordinates
        done = True
        for i, sl in enumerate(slices):
            Mi = B[sl, sl] * (lam_flat[sl] * (1.0 + gflat[sl]))[None, :]
            mus[i] = np.max(np.abs(np.linalg.eigvals(Mi)))
            if abs(mus[i] - 1.0) > tol:
                done = False
        if done:
            break
        c = c / mus
    else:
        raise RuntimeError("structured-instance balancing did not converge")

    lam = [lam_flat[sl] for sl in slices]
    a = []
    for i, sl in enumerate(slices):
        Mi = B[sl, sl] * (lam_flat[sl] * (1.0 + gflat[sl]))[None, :]
        vals, vecs = np.linalg.eig(Mi)
        k = int(np.argmin(np.abs(vals - 1.0)))
        delta = vecs[:, k]
        a.append(lam_flat[sl] * delta * (1.0 + gflat[sl]))
    return lam, a

"""Multiplier computation: fixed-point iteration and large-array closed forms.

The multipliers normalize each user's weighted channel covariance term so
that lam_ik (1 + gamma_ik) h_ik^H R(lam)^{-1} h_ik = 1.  Iterating that
relation converges quickly in practice; for large antenna counts the
closed form lam_ik = 1 / (beta_ik (N - sum_{jl != ik} gamma_jl)) applies.
"""
from __future__ import annotations

import time

import numpy as np

from .errors import TooFewAntennas
from .linalg import herm, push_through_inverse, single_threaded_blas
from .qos import build_R
from .report import ITER_LIMIT, OPTIMAL, SolverReport
from .scenario import ChannelSet


def _regroup(flat: np.ndarray, ch: ChannelSet) -> list:
    return [flat[sl].copy() for sl in ch.group_slices()]


def fixed_point_lambda(
    ch: ChannelSet,
    gamma: list,
    tol: float = 1e-9,
    max_iter: int = 500,
    damping: float = 1.0,
) -> tuple[list, SolverReport]:
    """Solve the multiplier normalization equations by fixed-point iteration.

    Updates are simultaneous: lam <- 1 / ((1+gamma) * diag(H^H R(lam)^{-1} H)).
    All linear algebra runs in the K_tot-dimensional channel Gram geometry,
    so the per-iteration cost does not grow with the antenna count.  The
    report's residual is re-evaluated through the full-size covariance at
    exit.  A damping factor in (0, 1] geometrically averages successive
    iterates for pathological instances; the default applies none.
    """
    t0 = time.perf_counter()
    with single_threaded_blas():
        return _fixed_point_inner(ch, gamma, tol, max_iter, damping, t0)


def _fixed_point_inner(ch, gamma, tol, max_iter, damping, t0):
    H = ch.stacked()
    gram = herm(H) @ H
    gflat = np.concatenate([np.asarray(g, dtype=float) for g in gamma])
    beta = ch.beta_flat()
    lam = 1.0 / (beta * ch.N)  # matches the large-array limit to leading order
    residual = np.inf
    trajectory = []
    status = ITER_LIMIT
    it = 0
    min_iterate = float(lam.min())
    for it in range(1, max_iter + 1):
        E = push_through_inverse(gram, lam * gflat)
        quad = np.einsum("kl,lk->k", gram, E).real  # h_ik^H R^{-1} h_ik
        target = 1.0 / ((1.0 + gflat) * quad)
        residual = float(np.abs(lam * (1.0 + gflat) * quad - 1.0).max())
        trajectory.append(residual)
        if residual <= tol:
            status = OPTIMAL
            break
        lam = damping * target + (1.0 - damping) * lam
        min_iterate = min(min_iterate, float(lam.min()))
    # independent certificate through the full-dimension covariance
    lam_groups = _regroup(lam, ch)
    R = build_R(lam_groups, ch, gamma)
    from .linalg import hermitian_solve

    quad_full = np.einsum("nk,nk->k", H.conj(), hermitian_solve(R, H)).real
    cert = float(np.abs(lam * (1.0 + gflat) * quad_full - 1.0).max())
    rep = SolverReport(
        status=status,
        iterations=it,
        residual=cert,
        objective=float("nan"),
        trajectory=trajectory,
        extra={"iteration_residual": residual, "min_iterate": min_iterate},
    )
    rep.wall_ms = (time.perf_counter() - t0) * 1e3
    return lam_groups, rep


def interference_sums(gamma: list) -> np.ndarray:
    """For each user, the sum of all other users' targets."""
    gflat = np.concatenate([np.asarray(g, dtype=float) for g in gamma])
    return gflat.sum() - gflat


def asymptotic_lambda(beta: list, gamma: list, N: int) -> list:
    """Large-array closed form lam_ik = 1 / (beta_ik (N - sum_{jl!=ik} gamma_jl)).

    Raises TooFewAntennas when any denominator is nonpositive.
    """
    bflat = np.concatenate([np.atleast_1d(np.asarray(b, dtype=float)) for b in beta])
    others = interference_sums(gamma)
    denom = N - others
    if np.any(denom <= 0):
        raise TooFewAntennas(
            f"need N > {others.max():.6g} for the large-array multiplier form"
        )
    lam_flat = 1.0 / (bflat * denom)
    out, ofs = [], 0
    for g in gamma:
        k = np.asarray(g).shape[0]
        out.append(lam_flat[ofs:ofs + k].copy())
        ofs += k
    return out


def asymptotic_R(ch: ChannelSet, gamma: list) -> np.ndarray:
    """Large-array covariance approximation for equal targets.

    Equals I + (N/gamma - (K_tot - 1))^{-1} sum g_ik g_ik^H with
    g_ik = h_ik / sqrt(beta_ik); computed by feeding the closed-form
    multipliers through the exact covariance builder, which is the same
    formula.
    """
    gflat = np.concatenate([np.asarray(g, dtype=float) for g in gamma])
    if not np.all(gflat == gflat[0]):
        from .errors import UnequalTargets

        raise UnequalTargets("the covariance approximation requires equal targets")
    lam = asymptotic_lambda(ch.beta, gamma, ch.N)
    return build_R(lam, ch, gamma)

"""Small dense SDP solver: primal-dual path following with NT scaling.

Problem form, over Hermitian PSD blocks X_b:

    minimize    sum_b  tr(C_b X_b)
    subject to  sum_b  tr(A_{m,b} X_b) >= r_m,   m = 1..M

All C_b and A_{m,b} are Hermitian (complex allowed).  Inequalities get a
scalar slack that is carried as an extra 1x1 block, after which the solver
runs on the standard equality form.  Block sizes here are tens, not
thousands, so all kernels are dense.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch
from .linalg import herm, hermitize, require_hermitian, single_threaded_blas
from .report import (
    INFEASIBLE,
    ITER_LIMIT,
    NUMERICAL_FAILURE,
    OPTIMAL,
    SolverReport,
)


@dataclass
class SdpProblem:
    """Block SDP with >= constraints.

    A[m][b] is the coefficient of block b in constraint m (None for absent).
    """

    block_sizes: list
    C: list
    A: list
    r: np.ndarray

    def validate(self) -> None:
        if len(self.block_sizes) < 1:
            raise DimensionMismatch("at least one block is required")
        if len(self.C) != len(self.block_sizes):
            raise DimensionMismatch("objective block count mismatch")
        for b, c in enumerate(self.C):
            require_hermitian(c, f"C[{b}]")
            if c.shape[0] != self.block_sizes[b]:
                raise DimensionMismatch(f"C[{b}] size mismatch")
        if len(self.A) != len(self.r):
            raise DimensionMismatch("constraint count mismatch")
        for m, row in enumerate(self.A):
            if len(row) != len(self.block_sizes):
                raise DimensionMismatch(f"constraint {m} block count mismatch")
            for b, a in enumerate(row):
                if a is None:
                    continue
                require_hermitian(a, f"A[{m}][{b}]")
                if a.shape[0] != self.block_sizes[b]:
                    raise DimensionMismatch(f"A[{m}][{b}] size mismatch")


def _max_step(block: np.ndarray, delta: np.ndarray) -> float:
    """Largest alpha with block + alpha*delta staying PSD (block is PD)."""
    if block.shape[0] == 1:
        x = block[0, 0].real
        d = delta[0, 0].real
        return np.inf if d >= 0 else x / (-d)
    try:
        L = sla.cholesky(block, lower=True, check_finite=False)
    except sla.LinAlgError:
        return 0.0
    y = sla.solve_triangular(L, delta, lower=True, check_finite=False)
    z = sla.solve_triangular(L, herm(y), lower=True, check_finite=False)
    lam = np.linalg.eigvalsh(hermitize(z))[0]
    return np.inf if lam >= 0 else 1.0 / (-lam)


def _nt_scaling(x: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """NT scaling point W (W S W = X) and S^{-1}."""
    if x.shape[0] == 1:
        sv = s[0, 0].real
        return np.array([[np.sqrt(x[0, 0].real / sv)]], dtype=complex), \
            np.array([[1.0 / sv]], dtype=complex)
    Ls = sla.cholesky(s, lower=True, check_finite=False)
    t = herm(Ls) @ x @ Ls
    w_eig, q = np.linalg.eigh(hermitize(t))
    w_eig = np.clip(w_eig, 1e-300, None)
    thalf = (q * np.sqrt(w_eig)) @ herm(q)
    tmp = sla.solve_triangular(herm(Ls), thalf, lower=False, check_finite=False)
    w = herm(sla.solve_triangular(herm(Ls), herm(tmp), lower=False,
                                  check_finite=False))
    eye = np.eye(s.shape[0], dtype=complex)
    s_inv = sla.cho_solve((Ls, True), eye, check_finite=False)
    return hermitize(w), hermitize(s_inv)


class _Internal:
    """Equality-form data with slack blocks appended."""

    def __init__(self, p: SdpProblem):
        m = len(p.r)
        self.n_orig = len(p.block_sizes)
        self.sizes = list(p.block_sizes) + [1] * m
        self.C = [c.astype(complex) for c in p.C] + [
            np.zeros((1, 1), dtype=complex) for _ in range(m)
        ]
        self.A = []
        for i, row in enumerate(p.A):
            ext = [None if a is None else a.astype(complex) for a in row]
            ext += [None] * m
            ext[self.n_orig + i] = -np.ones((1, 1), dtype=complex)
            self.A.append(ext)
        self.r = np.asarray(p.r, dtype=float)
        self.m = m
        self.ntot = sum(self.sizes)

    def apply(self, blocks: list) -> np.ndarray:
        out = np.zeros(self.m)
        for i, row in enumerate(self.A):
            acc = 0.0
            for a, z in zip(row, blocks):
                if a is not None:
                    acc += np.tensordot(a, z.conj()).real
            out[i] = acc
        return out

    def combo(self, y: np.ndarray) -> list:
        out = [np.zeros((d, d), dtype=complex) for d in self.sizes]
        for i, row in enumerate(self.A):
            if y[i] == 0.0:
                continue
            for b, a in enumerate(row):
                if a is not None:
                    out[b] += y[i] * a
        return out


def _certify_infeasible(ii: _Internal, y: np.ndarray, tol: float) -> bool:
    """Farkas-style check: y+ >= 0 with sum y+_m A_m <= 0 and r^T y+ > 0."""
    yp = np.clip(y, 0.0, None)
    norm = np.abs(yp).sum()
    if norm <= 0:
        return False
    yh = yp / norm
    if float(ii.r @ yh) <= 10.0 * tol:
        return False
    combo = ii.combo(yh)
    for b in range(ii.n_orig):
        block = combo[b]
        scale = max(1.0, float(np.abs(block).max()))
        if np.linalg.eigvalsh(hermitize(block))[-1] > tol * scale:
            return False
    return True


def solve_sdp(
    p: SdpProblem,
    tol: float = 1e-7,
    max_iter: int = 100,
    validate: bool = True,
) -> tuple[list, np.ndarray, SolverReport]:
    """Solve the block SDP; returns (X blocks, dual vector y, report).

    On OPTIMAL: complementarity gap <= tol * scale, every X_b PSD up to
    -tol, constraint violation <= tol * scale.  The per-iteration
    trajectory records primal/dual objectives and residual norms.
    """
    t_start = time.perf_counter()
    if validate:
        p.validate()
    with single_threaded_blas():
        return _solve_sdp_inner(p, tol, max_iter, t_start)


def _solve_sdp_inner(p: SdpProblem, tol: float, max_iter: int, t_start: float):
    ii = _Internal(p)
    m = ii.m

    norm_a = np.array(
        [max([1.0] + [np.linalg.norm(a) for a in row if a is not None])
         for row in ii.A]
    )
    norm_c = max([1.0] + [float(np.linalg.norm(c)) for c in ii.C])
    tau_x = 10.0 * max(1.0, float(np.max((1.0 + np.abs(ii.r)) / norm_a)))
    tau_s = 10.0 * max(1.0, norm_c, float(norm_a.max()))

    X = [tau_x * np.eye(d, dtype=complex) for d in ii.sizes]
    S = [tau_s * np.eye(d, dtype=complex) for d in ii.sizes]
    y = np.zeros(m)

    trajectory = []
    status = ITER_LIMIT
    it = 0
    for it in range(1, max_iter + 1):
        gap = sum(np.tensordot(xb, sb.conj()).real for xb, sb in zip(X, S))
        mu = gap / ii.ntot
        pobj = sum(np.tensordot(cb, xb.conj()).real for cb, xb in zip(ii.C, X))
        dobj = float(ii.r @ y)
        rp = ii.r - ii.apply(X)
        combo = ii.combo(y)
        Rd = [cb - ab - sb for cb, ab, sb in zip(ii.C, combo, S)]
        rp_norm = float(np.abs(rp).max()) if m else 0.0
        rd_norm = max(float(np.abs(d).max()) for d in Rd)
        scale = 1.0 + abs(pobj) + abs(dobj)
        # exact decomposition: primal - dual = gap - y.Rp + <Rd, X>
        cross_p = float(y @ rp)
        cross_d = float(sum(np.tensordot(db, xb.conj()).real
                            for db, xb in zip(Rd, X)))
        trajectory.append(
            {
                "primal": pobj,
                "dual": dobj,
                "gap": gap,
                "mu": mu,
                "rp": rp_norm,
                "rd": rd_norm,
                "cross_primal": cross_p,
                "cross_dual": cross_d,
            }
        )
        if (
            gap <= tol * scale
            and rp_norm <= tol * (1.0 + np.abs(ii.r).max(initial=0.0))
            and rd_norm <= tol * (1.0 + norm_c)
        ):
            status = OPTIMAL
            break
        if np.abs(y).max(initial=0.0) > 1e2 * (1.0 + norm_c) and \
                _certify_infeasible(ii, y, 1e-9):
            status = INFEASIBLE
            break
        if not np.isfinite(gap) or not np.isfinite(rd_norm):
            status = NUMERICAL_FAILURE
            break

        W = []
        S_inv = []
        for xb, sb in zip(X, S):
            wb, sib = _nt_scaling(xb, sb)
            W.append(wb)
            S_inv.append(sib)

        # Schur complement M_ij = sum_b tr(A_i W A_j W)
        WAW = []
        for row in ii.A:
            WAW.append(
                [None if a is None else hermitize(wb @ a @ wb)
                 for a, wb in zip(row, W)]
            )
        M = np.zeros((m, m))
        for i in range(m):
            for j in range(i, m):
                acc = 0.0
                for b in range(len(ii.sizes)):
                    a = ii.A[j][b]
                    t_ = WAW[i][b]
                    if a is not None and t_ is not None:
                        acc += np.tensordot(t_, a.conj()).real
                M[i, j] = M[j, i] = acc
        jitter = 1e-13 * max(1.0, np.trace(M) / m)
        try:
            cf = sla.cho_factor(M + jitter * np.eye(m), lower=True,
                                check_finite=False)
        except sla.LinAlgError:
            try:
                cf = sla.cho_factor(M + 1e-7 * np.trace(M) / m * np.eye(m),
                                    lower=True, check_finite=False)
            except sla.LinAlgError:
                status = NUMERICAL_FAILURE
                break

        WRdW = [hermitize(wb @ rb @ wb) for wb, rb in zip(W, Rd)]
        a_wrdw = np.array(
            [
                sum(
                    np.tensordot(ii.A[i][b], WRdW[b].conj()).real
                    for b in range(len(ii.sizes))
                    if ii.A[i][b] is not None
                )
                for i in range(m)
            ]
        )

        def direction(rc_blocks):
            a_rc = np.array(
                [
                    sum(
                        np.tensordot(ii.A[i][b], rc_blocks[b].conj()).real
                        for b in range(len(ii.sizes))
                        if ii.A[i][b] is not None
                    )
                    for i in range(m)
                ]
            )
            dy = sla.cho_solve(cf, rp - a_rc + a_wrdw, check_finite=False)
            dcombo = ii.combo(dy)
            dS = [rb - db for rb, db in zip(Rd, dcombo)]
            dX = [
                hermitize(rc - wb @ ds @ wb)
                for rc, wb, ds in zip(rc_blocks, W, dS)
            ]
            return dy, dS, dX

        # predictor
        rc_aff = [-xb for xb in X]
        dy_a, dS_a, dX_a = direction(rc_aff)
        ap = min(1.0, 0.98 * min(_max_step(xb, dxb) for xb, dxb in zip(X, dX_a)))
        ad = min(1.0, 0.98 * min(_max_step(sb, dsb) for sb, dsb in zip(S, dS_a)))
        gap_aff = sum(
            np.tensordot(xb + ap * dxb, (sb + ad * dsb).conj()).real
            for xb, dxb, sb, dsb in zip(X, dX_a, S, dS_a)
        )
        sigma = float(np.clip((max(gap_aff, 0.0) / gap) ** 3, 1e-4, 0.9))

        # corrector (reuses the Schur factorization)
        rc = [sigma * mu * sib - xb for sib, xb in zip(S_inv, X)]
        dy, dS, dX = direction(rc)
        ap = min(1.0, 0.98 * min(_max_step(xb, dxb) for xb, dxb in zip(X, dX)))
        ad = min(1.0, 0.98 * min(_max_step(sb, dsb) for sb, dsb in zip(S, dS)))
        X = [hermitize(xb + ap * dxb) for xb, dxb in zip(X, dX)]
        S = [hermitize(sb + ad * dsb) for sb, dsb in zip(S, dS)]
        y = y + ad * dy

    gap = sum(np.tensordot(xb, sb.conj()).real for xb, sb in zip(X, S))
    pobj = sum(np.tensordot(cb, xb.conj()).real for cb, xb in zip(ii.C, X))
    rp = ii.r - ii.apply(X)
    rep = SolverReport(
        status=status,
        iterations=it,
        gap=gap,
        residual=float(np.abs(rp).max()) if m else 0.0,
        objective=pobj,
        trajectory=trajectory,
        extra={"dual_objective": float(ii.r @ y)},
    )
    rep.wall_ms = (time.perf_counter() - t_start) * 1e3
    return X[: ii.n_orig], y, rep

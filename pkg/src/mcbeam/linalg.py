"""Dense complex linear algebra helpers.

Matrices are plain complex128 ndarrays. Hermitian inputs are expected to
satisfy max|A - A^H| <= 1e-12 * max|A|; `require_hermitian` enforces this
where an operation depends on it.
"""
from __future__ import annotations

from contextlib import contextmanager, nullcontext

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, NotPositiveDefinite, ZeroMatrix

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None

HERMITIAN_RTOL = 1e-12


def single_threaded_blas():
    """Pin BLAS to one thread for the enclosed solve.

    Solver calls are single-threaded by contract; on small matrices the
    multi-threaded kernels spend more time synchronizing than computing.
    """
    if threadpool_limits is None:  # pragma: no cover
        return nullcontext()
    return threadpool_limits(limits=1)


def herm(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def hermitize(a: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, killing roundoff asymmetry."""
    return 0.5 * (a + herm(a))


def is_hermitian(a: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = max(np.abs(a).max(), 1e-300)
    return np.abs(a - herm(a)).max() <= rtol * scale


def require_hermitian(a: np.ndarray, name: str = "matrix") -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if not is_hermitian(a):
        raise DimensionMismatch(f"{name} is not Hermitian within tolerance")


def hermitian_factor(a: np.ndarray):
    """Cholesky factorization of a Hermitian positive definite matrix.

    Raises NotPositiveDefinite when a nonpositive pivot is encountered.
    """
    try:
        return sla.cho_factor(a, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def hermitian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for Hermitian positive definite A via Cholesky.

    Never forms A^{-1}; the residual satisfies ||A X - B||_F <= 1e-10 ||B||_F
    for well-conditioned inputs.
    """
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(
            f"A is {a.shape} but B has leading dimension {b.shape[0]}"
        )
    c = hermitian_factor(a)
    return sla.cho_solve(c, b, check_finite=False)


def orthonormal_range(h: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, int]:
    """Orthonormal basis of the column space of a nonzero matrix.

    Returns (U, r) where U is N x r with U^H U = I_r and r is the numerical
    rank at threshold tol * (largest singular value).
    """
    if not np.isfinite(h).all():
        raise ValueError("matrix contains non-finite entries")
    if np.linalg.norm(h) == 0.0:
        raise ZeroMatrix("cannot compute the range of an all-zero matrix")
    u, s, _ = np.linalg.svd(np.atleast_2d(h), full_matrices=False)
    r = int(np.sum(s > tol * s[0]))
    r = max(r, 1)
    return u[:, :r], r


def psd_sqrt(a: np.ndarray, clip: float = 0.0) -> np.ndarray:
    """Hermitian square root of a PSD matrix; tiny negative eigenvalues are clipped."""
    w, v = np.linalg.eigh(hermitize(a))
    w = np.clip(w, clip, None)
    return (v * np.sqrt(w)) @ herm(v)


def min_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(a))[0])


# -- complex-to-real lifting ------------------------------------------------
#
# A complex vector w maps to x = [Re w; Im w].  For Hermitian Q the real
# symmetric lift L(Q) = [[Re Q, -Im Q], [Im Q, Re Q]] satisfies
# x^T L(Q) x = w^H Q w, and for any vector b, 2*Re{b^H w} = 2 * lift(b)^T x.


def lift_vector(w: np.ndarray) -> np.ndarray:
    return np.concatenate([w.real, w.imag])


def unlift_vector(x: np.ndarray) -> np.ndarray:
    n = x.shape[0] // 2
    return x[:n] + 1j * x[n:]


def lift_hermitian(q: np.ndarray) -> np.ndarray:
    re, im = q.real, q.imag
    return np.block([[re, -im], [im, re]])


def push_through_inverse(gram: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Solve the K x K system behind (I + H D H^H)^{-1} H = H E.

    gram = H^H H and d holds the diagonal of D; returns E = (I + D gram)^{-1}.
    Exact algebraic identity, so products against the channel columns never
    require the N x N matrix.
    """
    k = gram.shape[0]
    m = np.eye(k, dtype=complex) + d[:, None] * gram
    return np.linalg.solve(m, np.eye(k, dtype=complex))

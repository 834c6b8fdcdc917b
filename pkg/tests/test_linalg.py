import numpy as np
import pytest

from mcbeam.errors import NotPositiveDefinite, ZeroMatrix
from mcbeam.linalg import (
    herm,
    hermitian_solve,
    lift_hermitian,
    lift_vector,
    orthonormal_range,
    push_through_inverse,
    unlift_vector,
)


def test_hermitian_solve_identity():
    b = np.arange(9, dtype=complex).reshape(3, 3)
    x = hermitian_solve(np.eye(3, dtype=complex), b)
    assert np.allclose(x, b, atol=1e-14)


def test_hermitian_solve_scalar_multiple():
    x = hermitian_solve(2.0 * np.eye(4, dtype=complex), np.eye(4, dtype=complex))
    assert np.allclose(x, 0.5 * np.eye(4), atol=1e-14)


def test_hermitian_solve_multiply_back(rng):
    m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    a = herm(m) @ m + np.eye(6)
    b = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
    x = hermitian_solve(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_hermitian_solve_rejects_indefinite():
    a = np.diag([1.0, -1.0]).astype(complex)
    with pytest.raises(NotPositiveDefinite):
        hermitian_solve(a, np.ones((2, 1), dtype=complex))


def test_orthonormal_range_duplicate_column():
    e1 = np.zeros((4, 1), dtype=complex)
    e1[0] = 1.0
    h = np.hstack([e1, e1])
    u, r = orthonormal_range(h)
    assert r == 1
    assert np.allclose(np.abs(u[:, 0]), np.abs(e1[:, 0]))


def test_orthonormal_range_identity():
    u, r = orthonormal_range(np.eye(5, dtype=complex))
    assert r == 5
    assert np.allclose(herm(u) @ u, np.eye(5), atol=1e-10)


def test_orthonormal_range_projector(rng):
    h = rng.standard_normal((12, 4)) + 1j * rng.standard_normal((12, 4))
    u, r = orthonormal_range(h)
    assert r == 4
    assert np.linalg.norm(h - u @ (herm(u) @ h)) <= 1e-9
    assert np.allclose(herm(u) @ u, np.eye(r), atol=1e-10)


def test_orthonormal_range_zero_matrix():
    with pytest.raises(ZeroMatrix):
        orthonormal_range(np.zeros((3, 2)))


def test_lift_roundtrip_random(rng):
    for _ in range(100):
        n = int(rng.integers(1, 10))
        m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        q = 0.5 * (m + herm(m))
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x = lift_vector(w)
        assert np.allclose(x @ lift_hermitian(q) @ x, np.vdot(w, q @ w).real,
                           rtol=1e-12, atol=1e-12)
        assert np.allclose(unlift_vector(x), w)


def test_push_through_matches_direct_inverse(rng):
    n, k = 20, 6
    h = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    d = rng.uniform(0.0, 2.0, size=k)
    gram = herm(h) @ h
    e = push_through_inverse(gram, d)
    big = np.eye(n, dtype=complex) + (h * d[None, :]) @ herm(h)
    assert np.allclose(np.linalg.solve(big, h), h @ e, atol=1e-10)

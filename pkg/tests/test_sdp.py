import numpy as np
import pytest

from mcbeam.linalg import herm, hermitize
from mcbeam.sdp import SdpProblem, solve_sdp


def test_trace_floor():
    p = SdpProblem(block_sizes=[2], C=[np.eye(2, dtype=complex)],
                   A=[[np.eye(2, dtype=complex)]], r=np.array([1.0]))
    X, y, rep = solve_sdp(p)
    assert rep.ok
    assert abs(rep.objective - 1.0) <= 1e-6
    assert rep.gap <= 1e-7 * (1 + 2 * abs(rep.objective))


def test_lp_embedding_diagonal():
    # min x1 + 2 x2 s.t. x1 + x2 >= 1, x >= 0 has optimum 1 at (1, 0)
    p = SdpProblem(block_sizes=[2], C=[np.diag([1.0, 2.0]).astype(complex)],
                   A=[[np.eye(2, dtype=complex)]], r=np.array([1.0]))
    X, _, rep = solve_sdp(p)
    assert rep.ok
    assert abs(rep.objective - 1.0) <= 1e-6
    d = np.diag(X[0]).real
    assert abs(d[0] - 1.0) <= 1e-5 and abs(d[1]) <= 1e-5


def test_infeasible_certificate():
    p = SdpProblem(block_sizes=[2], C=[np.eye(2, dtype=complex)],
                   A=[[-np.eye(2, dtype=complex)]], r=np.array([1.0]))
    _, _, rep = solve_sdp(p)
    assert rep.status == "infeasible"


def test_multiblock_complex(rng):
    def rand_herm(n):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return hermitize(a)

    C = [rand_herm(3) + 4 * np.eye(3), rand_herm(2) + 4 * np.eye(2)]
    A = [[rand_herm(3), rand_herm(2)] for _ in range(4)]
    r = rng.uniform(0.5, 2.0, size=4)
    X, y, rep = solve_sdp(SdpProblem([3, 2], C, A, r))
    assert rep.ok
    for xb in X:
        assert np.linalg.eigvalsh(xb)[0] >= -1e-7
    viol = np.array([
        sum(np.tensordot(a, xb.conj()).real for a, xb in zip(row, X)) - rm
        for row, rm in zip(A, r)
    ])
    assert viol.min() >= -1e-6
    # weak duality at the solution
    assert rep.extra["dual_objective"] <= rep.objective + 1e-6


def test_weak_duality_along_path(rng):
    def rand_herm(n):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return hermitize(a)

    C = [rand_herm(3) + 4 * np.eye(3)]
    A = [[rand_herm(3)] for _ in range(3)]
    r = rng.uniform(0.5, 1.5, size=3)
    _, _, rep = solve_sdp(SdpProblem([3], C, A, r))
    assert rep.ok
    for it in rep.trajectory:
        scale = 1.0 + abs(it["primal"]) + abs(it["dual"])
        # exact identity: primal - dual = gap - y.Rp + <Rd, X>, gap >= 0
        lhs = it["primal"] - it["dual"]
        rhs = it["gap"] - it["cross_primal"] + it["cross_dual"]
        assert abs(lhs - rhs) <= 1e-9 * scale
        assert it["gap"] >= -1e-12 * scale


def sdp_grid_oracle(C, A, r, levels=9, points=9, restarts=3):
    """Brute force over a Cholesky parameterization of X (3x3 real)."""
    n = C.shape[0]
    tr_bound = np.trace(C) / np.linalg.eigvalsh(C)[0]
    width = float(np.sqrt(max(tr_bound, 1.0)))
    idx = np.tril_indices(n)
    nv = len(idx[0])

    def unpack(params):
        L = np.zeros((params.shape[0], n, n))
        L[:, idx[0], idx[1]] = params
        return L

    best_f = np.inf
    rng = np.random.default_rng(0)
    for restart in range(restarts):
        center = np.zeros(nv) if restart == 0 else rng.uniform(-width / 2,
                                                               width / 2, nv)
        half = np.full(nv, width)
        for _ in range(levels):
            axes = [np.linspace(center[i] - half[i], center[i] + half[i],
                                points) for i in range(nv)]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
            L = unpack(pts)
            X = L @ np.transpose(L, (0, 2, 1))
            feas = np.ones(pts.shape[0], dtype=bool)
            for Am, rm in zip(A, r):
                feas &= np.einsum("bij,ji->b", X, Am) >= rm - 1e-9
            objs = np.einsum("bij,ji->b", X, C)
            objs[~feas] = np.inf
            k = int(np.argmin(objs))
            if objs[k] < best_f:
                best_f = float(objs[k])
            if np.isfinite(objs[k]):
                center = pts[k]
            half = np.maximum(half / 2.5, 1e-4)
    return best_f


@pytest.mark.parametrize("trial", range(3))
def test_grid_oracle_single_block(trial):
    rng = np.random.default_rng(40 + trial)
    n = 3
    m = rng.standard_normal((n, n))
    C = m.T @ m + 2.0 * np.eye(n)
    A, r = [], []
    for _ in range(3):
        am = rng.standard_normal((n, n))
        am = 0.5 * (am + am.T)
        A.append(am)
        r.append(float(np.trace(am)) - rng.uniform(0.5, 1.5))  # X=I strictly ok
    X, _, rep = solve_sdp(SdpProblem([n], [C.astype(complex)],
                                     [[a.astype(complex)] for a in A],
                                     np.array(r)))
    assert rep.ok
    f_grid = sdp_grid_oracle(C, A, np.array(r))
    # the grid point is PSD-feasible by construction, hence an upper bound
    assert f_grid >= rep.objective - 1e-6
    assert abs(f_grid - rep.objective) <= 1e-2 * max(1.0, abs(rep.objective))

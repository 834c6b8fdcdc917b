"""Property-suite registry behind the `validate` command.

Each check exercises one documented invariant and reports its margin
(how far the measured statistic sits from its threshold, positive =
pass).  Checks are seeded and deterministic.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .direct import direct_sca_qos, qos_sdr_lower_bound
from .linalg import (
    herm,
    lift_hermitian,
    lift_vector,
    min_eigenvalue,
    orthonormal_range,
)
from .mmf import assemble_mmf, solve_mmf_bisection
from .multipliers import fixed_point_lambda
from .qcqp import ConvexQcqp, solve_convex_qcqp
from .qos import (
    assemble_beamformer,
    assemble_beamformer_interference_form,
    consistent_structured_solution,
    duality_check,
    build_R,
    min_sinr_ratio,
    power_identity,
    sinr,
    structure_residual,
    total_power,
    unicast_reference,
)
from .scenario import gen_normalized_channels, gen_pathloss_channels, make_config
from .sdp import SdpProblem, solve_sdp
from .weights import (
    build_reduced_problem,
    randomize_and_scale,
    solve_qos,
    solve_weights_sdr,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str
    wall_ms: float = 0.0


def _rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


def _rand_herm(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)


# -- numerics ----------------------------------------------------------------

def check_lift_roundtrip(seed):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 9))
        q = _rand_herm(rng, n)
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x = lift_vector(w)
        quad = x @ lift_hermitian(q) @ x
        lin = 2.0 * lift_vector(b) @ x
        ref_q = np.vdot(w, q @ w).real
        ref_l = 2.0 * np.vdot(b, w).real
        scale = max(1.0, abs(ref_q), abs(ref_l))
        worst = max(worst, abs(quad - ref_q) / scale, abs(lin - ref_l) / scale)
    return worst <= 1e-12, 1e-12 - worst, f"max lift mismatch {worst:.2e}"


def check_qcqp_monotone(seed):
    rng = _rng(seed)
    worst = -np.inf
    for _ in range(10):
        n = 4
        m0 = rng.standard_normal((n, n))
        cons = [(np.eye(n), -rng.standard_normal(n) * 0.2, -1.0)]
        for _ in range(3):
            mm = rng.standard_normal((n, n))
            cons.append((mm.T @ mm * 0.2, rng.standard_normal(n) * 0.2,
                         -rng.uniform(0.5, 1.5)))
        p = ConvexQcqp(n=n, Q0=m0.T @ m0 + 0.2 * np.eye(n),
                       q0=rng.standard_normal(n), c0=0.0, constraints=cons)
        _, rep = solve_convex_qcqp(p)
        if not rep.ok or len(rep.trajectory) < 2:
            continue
        t = np.array(rep.trajectory)
        scale = 1.0 + np.abs(t).max()
        worst = max(worst, float(np.max(np.diff(t)) / scale))
    return worst <= 1e-10, 1e-10 - worst, f"max objective uptick {worst:.2e}"


def check_sdp_weak_duality(seed):
    rng = _rng(seed)
    worst = -np.inf
    for trial in range(6):
        sizes = [3, 2]
        C = [_rand_herm(rng, 3) + 4 * np.eye(3), _rand_herm(rng, 2) + 4 * np.eye(2)]
        A = [[_rand_herm(rng, 3), _rand_herm(rng, 2)] for _ in range(4)]
        r = rng.uniform(0.5, 2.0, size=4)
        _, _, rep = solve_sdp(SdpProblem(sizes, C, A, r))
        if not rep.ok:
            continue
        for it in rep.trajectory:
            # identity: primal - dual = gap - cross_primal + cross_dual,
            # and gap = <X,S> >= 0 certifies weak duality modulo residuals
            scale = 1.0 + abs(it["primal"]) + abs(it["dual"])
            lhs = it["dual"] - it["primal"]
            bound = -it["gap"] + it["cross_primal"] - it["cross_dual"]
            worst = max(worst, (lhs - bound) / scale, -it["gap"] / scale)
    return worst <= 1e-9, 1e-9 - worst, f"max duality-identity violation {worst:.2e}"


def check_orthonormal_idempotence(seed):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(20):
        n, k = int(rng.integers(4, 20)), int(rng.integers(1, 8))
        h = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        if rng.uniform() < 0.3 and k > 1:
            h[:, -1] = h[:, 0]  # force rank deficiency
        u, r = orthonormal_range(h)
        u2, r2 = orthonormal_range(u)
        if r2 != r:
            return False, -1.0, f"rank changed {r} -> {r2}"
        gap = np.abs(u2 @ herm(u2) - u @ herm(u)).max()
        worst = max(worst, float(gap))
    return worst <= 1e-9, 1e-9 - worst, f"max projector drift {worst:.2e}"


# -- scenario ----------------------------------------------------------------

def check_reproducibility(seed):
    cfg = make_config(G=2, K=3, N=16)
    a = gen_normalized_channels(cfg, seed)
    b = gen_normalized_channels(cfg, seed)
    same = all(np.array_equal(x, y) for x, y in zip(a.H, b.H))
    c, dc = gen_pathloss_channels(cfg, seed)
    d, dd = gen_pathloss_channels(cfg, seed)
    same &= all(np.array_equal(x, y) for x, y in zip(c.H, d.H))
    same &= all(np.array_equal(x, y) for x, y in zip(dc, dd))
    return same, 1.0 if same else -1.0, "bit-identical channels"


def check_independence_proxy(seed):
    cfg = make_config(G=3, K=5, N=500)
    acc = []
    for t in range(200):
        ch = gen_normalized_channels(cfg, seed + t)
        g = np.abs(herm(ch.stacked()) @ ch.stacked()) / cfg.N
        off = g[~np.eye(g.shape[0], dtype=bool)]
        acc.append(off.mean())
    mean = float(np.mean(acc))
    return mean <= 0.08, 0.08 - mean, f"mean cross-correlation {mean:.4f}"


# -- structured-solution core ------------------------------------------------

def check_form_equivalence(seed):
    rng = _rng(seed)
    worst = 0.0
    for t in range(100):
        G = int(rng.integers(1, 4))
        K = [int(rng.integers(1, 4)) for _ in range(G)]
        N = int(rng.integers(sum(K) + 1, 33))
        cfg = make_config(G=G, K=K, N=N, gamma_db=float(rng.uniform(0, 10)))
        ch = gen_normalized_channels(cfg, seed * 1000 + t)
        lam, a = consistent_structured_solution(ch, cfg.gamma, seed=t)
        alpha = [ai / (1.0 + gi) for ai, gi in zip(a, cfg.gamma)]
        w1 = assemble_beamformer(lam, a, ch, cfg.gamma)
        w2 = assemble_beamformer_interference_form(lam, alpha, ch, cfg.gamma)
        gap = max(
            np.linalg.norm(x - y) / max(np.linalg.norm(x), 1e-300)
            for x, y in zip(w1, w2)
        )
        worst = max(worst, float(gap))
    return worst <= 1e-8, 1e-8 - worst, f"max form disagreement {worst:.2e}"


def check_scale_covariance(seed):
    rng = _rng(seed)
    cfg = make_config(G=3, K=4, N=24)
    ch = gen_normalized_channels(cfg, seed)
    lam = [rng.uniform(0, 0.2, k) for k in cfg.K]
    a = [rng.standard_normal(k) + 1j * rng.standard_normal(k) for k in cfg.K]
    worst = 0.0
    for c in (2.0, 0.3, 1.7 - 0.9j):
        w1 = assemble_beamformer(lam, [c * ai for ai in a], ch, cfg.gamma)
        w0 = assemble_beamformer(lam, a, ch, cfg.gamma)
        gap = max(
            np.abs(x - c * y).max() / max(np.abs(x).max(), 1e-300)
            for x, y in zip(w1, w0)
        )
        worst = max(worst, float(gap))
    return worst <= 5e-14, 5e-14 - worst, f"max scaling mismatch {worst:.2e}"


def check_r_eigenvalue_floor(seed):
    rng = _rng(seed)
    worst = np.inf
    for t in range(20):
        cfg = make_config(G=2, K=3, N=12)
        ch = gen_normalized_channels(cfg, seed + t)
        lam = [rng.uniform(0, 2.0, k) for k in cfg.K]
        if t % 5 == 0:
            lam = [np.zeros(k) for k in cfg.K]
        worst = min(worst, min_eigenvalue(build_R(lam, ch, cfg.gamma)))
    return worst >= 1.0 - 1e-10, worst - (1.0 - 1e-10), f"min eigenvalue {worst:.12f}"


def check_unicast_consistency(seed):
    worst_gap, worst_slack = 0.0, 0.0
    for t in range(5):
        cfg = make_config(G=3, K=1, N=8)
        ch = gen_normalized_channels(cfg, seed + t)
        w, lam, _ = unicast_reference(ch, cfg.gamma, cfg.sigma2)
        bound, _ = qos_sdr_lower_bound(ch, cfg)
        power = total_power(w)
        worst_gap = max(worst_gap, abs(power - bound) / bound)
        ratios = np.concatenate(sinr(w, ch, cfg.sigma2)) / cfg.gamma_flat()
        worst_slack = max(worst_slack, float(np.abs(ratios - 1.0).max()))
    ok = worst_gap <= 1e-4 and worst_slack <= 1e-8
    return ok, min(1e-4 - worst_gap, 1e-8 - worst_slack), (
        f"max relaxation gap {worst_gap:.2e}, max target slack {worst_slack:.2e}")


def check_weight_relation(seed):
    worst = 0.0
    for t in range(20):
        cfg = make_config(G=2, K=3, N=16, gamma_db=7.0)
        ch = gen_normalized_channels(cfg, seed + t)
        lam, a = consistent_structured_solution(ch, cfg.gamma, seed=t)
        w = assemble_beamformer(lam, a, ch, cfg.gamma)
        delta = [herm(Hi) @ wi for Hi, wi in zip(ch.H, w)]
        for ai, li, di, gi in zip(a, lam, delta, cfg.gamma):
            pred = li * di * (1.0 + gi)
            worst = max(worst, float(np.abs(pred - ai).max()
                                     / max(np.abs(ai).max(), 1e-300)))
    return worst <= 1e-8, 1e-8 - worst, f"max weight-relation residual {worst:.2e}"


def check_duality_form(seed):
    worst = 0.0
    for t in range(20):
        cfg = make_config(G=2, K=3, N=16, gamma_db=8.0)
        ch = gen_normalized_channels(cfg, seed + t)
        lam, a = consistent_structured_solution(ch, cfg.gamma, seed=t)
        w = assemble_beamformer(lam, a, ch, cfg.gamma)
        worst = max(worst, float(duality_check(w, lam, ch, cfg.gamma).max()))
        scaled = [3.7 * wi for wi in w]
        worst = max(worst, float(duality_check(scaled, lam, ch, cfg.gamma).max()))
    return worst <= 1e-8, 1e-8 - worst, f"max dual-form sine {worst:.2e}"


# -- multipliers -------------------------------------------------------------

def check_lambda_positivity(seed):
    worst = np.inf
    for t in range(10):
        cfg = make_config(G=3, K=5, N=40)
        ch = gen_normalized_channels(cfg, seed + t)
        lam, rep = fixed_point_lambda(ch, cfg.gamma)
        worst = min(worst, rep.extra["min_iterate"],
                    min(float(l.min()) for l in lam))
    return worst > 0, worst, f"min multiplier across iterates {worst:.3e}"


def check_fixed_point_certificate(seed):
    from .linalg import hermitian_solve

    worst = 0.0
    for t in range(5):
        cfg = make_config(G=3, K=5, N=50)
        ch = gen_normalized_channels(cfg, seed + t)
        lam, rep = fixed_point_lambda(ch, cfg.gamma)
        H = ch.stacked()
        R = build_R(lam, ch, cfg.gamma)
        quad = np.einsum("nk,nk->k", H.conj(), hermitian_solve(R, H)).real
        gflat = cfg.gamma_flat()
        resid = float(np.abs(np.concatenate(lam) * (1.0 + gflat) * quad - 1.0).max())
        worst = max(worst, abs(resid - rep.residual))
    return worst <= 1e-12, 1e-12 - worst, f"max certificate mismatch {worst:.2e}"


def check_cross_term_decay(seed):
    cfg_by_n, means = {}, []
    for N in (50, 200, 500):
        cfg = make_config(G=3, K=5, N=N)
        acc = []
        for t in range(100):
            ch = gen_normalized_channels(cfg, seed * 7919 + t)
            lam, _ = fixed_point_lambda(ch, cfg.gamma)
            H = ch.stacked()
            gram = herm(H) @ H
            from .linalg import push_through_inverse

            lam_flat = np.concatenate(lam)
            gflat = cfg.gamma_flat()
            B = gram @ push_through_inverse(gram, lam_flat * gflat)
            for sl in ch.group_slices():
                Bi = B[sl, sl]
                k = Bi.shape[0]
                if k == 1:
                    continue
                e = np.abs(lam_flat[sl][:, None] * (1.0 + gflat[sl][:, None]) * Bi)
                acc.extend(e[~np.eye(k, dtype=bool)].tolist())
        means.append(float(np.mean(acc)))
    monotone = all(means[i + 1] <= means[i] + 1e-12 for i in range(len(means) - 1))
    ok = monotone and means[-1] <= 0.15
    detail = "cross-term means " + ", ".join(f"{m:.4f}" for m in means)
    return ok, 0.15 - means[-1] if monotone else -1.0, detail


def check_cdf_concentration(seed):
    cfg = make_config(G=3, K=5, N=500)
    vals = []
    for t in range(100):
        ch, _ = gen_pathloss_channels(cfg, seed * 104729 + t)
        lam, _ = fixed_point_lambda(ch, cfg.gamma)
        vals.extend((np.concatenate(lam) * ch.beta_flat()).tolist())
    v = np.array(vals)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = (q3 - q1) / med
    return iqr <= 0.10, 0.10 - iqr, f"IQR/median of scaled multipliers {iqr:.4f}"


# -- weight stage ------------------------------------------------------------

def check_weight_sandwich(seed):
    # the relaxation bound is certified to the conic solver's gap
    # tolerance, so comparisons carry that much slack
    slack = 1e-6
    worst = -np.inf
    for t in range(5):
        cfg = make_config(G=3, K=5, N=40)
        ch = gen_normalized_channels(cfg, seed + t)
        sdr_sol, sdr_rep = solve_qos(ch, cfg, method="opt-sdr", seed=seed + t)
        sca_sol, _ = solve_qos(ch, cfg, method="opt-sca", seed=seed + t)
        lb = sdr_rep.extra["weight_lower_bound"]
        p_sdr, p_sca = sdr_sol.metrics["power"], sca_sol.metrics["power"]
        scale = max(p_sdr, 1e-12)
        worst = max(worst, (lb - p_sca) / scale, (p_sca - p_sdr) / scale)
    return worst <= slack, slack - worst, f"max sandwich violation {worst:.2e}"


def check_weight_feasibility(seed):
    worst = np.inf
    for t in range(5):
        cfg = make_config(G=3, K=5, N=30)
        ch = gen_normalized_channels(cfg, seed + t)
        for method in ("opt-sdr", "opt-sca"):
            sol, _ = solve_qos(ch, cfg, method=method, seed=seed + t)
            worst = min(worst, min_sinr_ratio(sol.w, ch, cfg.gamma, cfg.sigma2))
    return worst >= 1 - 1e-6, worst - (1 - 1e-6), f"min target ratio {worst:.9f}"


def check_dimension_independence(seed):
    dims = []
    for N in (50, 500):
        cfg = make_config(G=3, K=5, N=N)
        ch = gen_normalized_channels(cfg, seed)
        lam, _ = fixed_point_lambda(ch, cfg.gamma)
        rp = build_reduced_problem(ch, lam, cfg.gamma, cfg.sigma2)
        dims.append((tuple(rp.dims), sum(x.size for row in rp.f for x in row)))
    ok = dims[0] == dims[1] and dims[0][0] == (5, 5, 5)
    return ok, 1.0 if ok else -1.0, f"weight-problem data {dims[0]} at both N"


def check_randomization_determinism(seed):
    cfg = make_config(G=3, K=5, N=30)
    ch = gen_normalized_channels(cfg, seed)
    lam, _ = fixed_point_lambda(ch, cfg.gamma)
    rp = build_reduced_problem(ch, lam, cfg.gamma, cfg.sigma2)
    from .weights import _sdr_problem

    X, _, _ = solve_sdp(_sdr_problem(rp))
    g1 = randomize_and_scale(X, rp, n_rand=50, seed=seed)
    g2 = randomize_and_scale(X, rp, n_rand=50, seed=seed)
    same = all(np.array_equal(x, y) for x, y in zip(g1.a, g2.a))
    return same, 1.0 if same else -1.0, "identical weights for identical seeds"


# -- baselines and fairness --------------------------------------------------

def check_structure_validation(seed):
    cfg = make_config(G=3, K=5, N=200)
    resids = []
    for t in range(50):
        ch = gen_normalized_channels(cfg, seed * 31 + t)
        z0_sol, _ = solve_qos(ch, cfg, method="opt-sdr", seed=t)
        w, _ = direct_sca_qos(ch, cfg, z0_sol.w)
        lam, _ = fixed_point_lambda(ch, cfg.gamma)
        resids.append(float(structure_residual(w, lam, ch, cfg.gamma).mean()))
    mean = float(np.mean(resids))
    return mean <= 0.1, 0.1 - mean, f"mean structure residual {mean:.4f} (50 trials)"


def check_direct_sandwich(seed):
    # Lower side holds instancewise.  The upper side cannot: whenever the
    # direct relaxation is tight its extraction attains the global optimum,
    # which the structured solve (approximate multipliers) strictly
    # exceeds; the comparison is therefore a sample-mean ordering.
    from .direct import direct_sdr_qos

    slack = 1e-6
    worst_lower = -np.inf
    best_db, direct_db = [], []
    for t in range(16):
        cfg = make_config(G=3, K=5, N=32)
        ch = gen_normalized_channels(cfg, seed + t)
        w_d, lb, _ = direct_sdr_qos(ch, cfg, seed=seed + t)
        best = np.inf
        for method in ("opt-sdr", "opt-sca"):
            sol, _ = solve_qos(ch, cfg, method=method, seed=seed + t)
            best = min(best, sol.metrics["power"])
        p_d = total_power(w_d)
        worst_lower = max(worst_lower, (lb - best) / p_d)
        best_db.append(10 * np.log10(best))
        direct_db.append(10 * np.log10(p_d))
    mean_gap = float(np.mean(direct_db) - np.mean(best_db))
    ok = worst_lower <= slack and mean_gap >= 0.0
    return ok, min(slack - worst_lower, mean_gap), (
        f"max bound violation {worst_lower:.2e}, "
        f"direct minus structured mean {mean_gap:+.3f} dB")


def check_mmf_roundtrip(seed):
    worst = 0.0
    for t in range(3):
        cfg = make_config(G=3, K=5, N=32, P=10.0)
        ch = gen_normalized_channels(cfg, seed + t)
        w, t_star, rep = solve_mmf_bisection(ch, cfg, seed=seed + t)
        sol, _ = solve_qos(ch, cfg.with_targets(cfg.scaled_targets(t_star)),
                           seed=seed + t, fp_max_iter=3000)
        worst = max(worst, abs(sol.metrics["power"] - cfg.P) / cfg.P)
    return worst <= 0.01, 0.01 - worst, f"max power mismatch {worst:.4f}"


def check_mmf_power_compliance(seed):
    worst = -np.inf
    for t in range(3):
        cfg = make_config(G=3, K=5, N=32, P=10.0)
        ch = gen_normalized_channels(cfg, seed + t)
        w, t_star, _ = solve_mmf_bisection(ch, cfg, seed=seed + t)
        worst = max(worst, (total_power(w) - cfg.P * (1 + 1e-8)) / cfg.P)
        recomputed = min_sinr_ratio(w, ch, cfg.gamma, cfg.sigma2)
        if abs(recomputed - t_star) > 1e-12 * max(1.0, t_star):
            return False, -1.0, "reported ratio is not the recomputed minimum"
    return worst <= 0.0, -worst, f"max relative power excess {worst:.2e}"


def check_mmf_monotonicity(seed):
    cfg = make_config(G=2, K=2, N=16, P=5.0)
    ch = gen_normalized_channels(cfg, seed)
    ts = []
    for P in (2.0, 5.0, 12.0):
        c = make_config(G=2, K=2, N=16, P=P)
        _, t_star, _ = solve_mmf_bisection(ch, c, seed=seed)
        ts.append(t_star)
    inc = all(ts[i + 1] >= ts[i] * (1 - 1e-6) for i in range(len(ts) - 1))
    ts2 = []
    for gdb in (6.0, 10.0, 13.0):
        c = make_config(G=2, K=2, N=16, P=5.0, gamma_db=gdb)
        _, t_star, _ = solve_mmf_bisection(ch, c, seed=seed)
        ts2.append(t_star)
    dec = all(ts2[i + 1] <= ts2[i] * (1 + 1e-6) for i in range(len(ts2) - 1))
    ok = inc and dec
    return ok, 1.0 if ok else -1.0, (
        f"ratio vs budget {['%.3f' % t for t in ts]}, "
        f"vs targets {['%.3f' % t for t in ts2]}")


def check_mmf_reparameterization(seed):
    worst = 0.0
    for t in range(3):
        cfg = make_config(G=3, K=4, N=32, P=10.0)
        ch = gen_normalized_channels(cfg, seed + t)
        w, _, rep = solve_mmf_bisection(ch, cfg, seed=seed + t)
        wa = assemble_mmf(rep.extra["lam"], rep.extra["delta_implied"], ch, cfg,
                          t=rep.extra["t_bisection"])
        from .qos import sine_angle

        for wi, wai in zip(w, wa):
            worst = max(worst, sine_angle(wi, wai))
    return worst <= 1e-6, 1e-6 - worst, f"max reassembly sine {worst:.2e}"


ALL_CHECKS = [
    ("lift-roundtrip", check_lift_roundtrip),
    ("qcqp-monotone-trajectory", check_qcqp_monotone),
    ("sdp-weak-duality", check_sdp_weak_duality),
    ("orthonormal-range-idempotent", check_orthonormal_idempotence),
    ("channel-reproducibility", check_reproducibility),
    ("channel-independence-proxy", check_independence_proxy),
    ("form-equivalence", check_form_equivalence),
    ("assembly-scale-covariance", check_scale_covariance),
    ("covariance-eigenvalue-floor", check_r_eigenvalue_floor),
    ("unicast-consistency", check_unicast_consistency),
    ("weight-relation-consistency", check_weight_relation),
    ("dual-uplink-form", check_duality_form),
    ("multiplier-positivity", check_lambda_positivity),
    ("fixed-point-certificate", check_fixed_point_certificate),
    ("cross-term-decay", check_cross_term_decay),
    ("scaled-multiplier-concentration", check_cdf_concentration),
    ("weight-sandwich", check_weight_sandwich),
    ("weight-feasibility", check_weight_feasibility),
    ("dimension-independence", check_dimension_independence),
    ("randomization-determinism", check_randomization_determinism),
    ("structure-validation", check_structure_validation),
    ("direct-sandwich", check_direct_sandwich),
    ("mmf-inversion-roundtrip", check_mmf_roundtrip),
    ("mmf-power-compliance", check_mmf_power_compliance),
    ("mmf-monotonicity", check_mmf_monotonicity),
    ("mmf-reparameterization", check_mmf_reparameterization),
]


def run_validation(seed: int = 0, names: list | None = None) -> list:
    """Run the property suite; returns CheckResult per check."""
    results = []
    for name, fn in ALL_CHECKS:
        if names and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            passed, margin, detail = fn(seed)
        except Exception as exc:  # a crashed check is a failed check
            passed, margin, detail = False, -np.inf, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name=name, passed=bool(passed),
                                   margin=float(margin), detail=detail,
                                   wall_ms=(time.perf_counter() - t0) * 1e3))
    return results

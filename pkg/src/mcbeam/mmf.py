"""Max-min-fair beamforming via its inverse relation to the QoS problem.

Scaling every target by t and minimizing power is the inverse of
maximizing the worst target ratio under a power budget: a bisection over
t that matches the minimum power to the budget P solves the fairness
problem through any QoS solver.  Large-array shortcuts replace the
t-dependent covariance by a closed form built from the harmonic mean of
the channel variances, down to a fully closed-form beamformer.
"""
from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from .direct import qos_sdr_lower_bound
from .errors import Infeasible, McbeamError, UnequalTargets
from .linalg import herm, hermitize, hermitian_solve
from .qos import assemble_beamformer, min_sinr_ratio, total_power
from .report import OPTIMAL, SolverReport
from .scenario import ChannelSet, SystemConfig
from .weights import (
    reduced_problem_from_cov_weights,
    solve_qos,
    solve_weights_sca,
    solve_weights_sdr,
)

MMF_QOS_METHODS = ("opt-sdr", "opt-sca")


def harmonic_mean(values: np.ndarray) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.shape[0] / np.sum(1.0 / v))


def mmf_objective_from_multipliers(lam: list, gamma: list, sigma2: float,
                                   P: float) -> float:
    """Best target ratio implied by QoS multipliers: t = P / (sigma2 lam^T gamma)."""
    dot = sum(float(np.asarray(l) @ np.asarray(g)) for l, g in zip(lam, gamma))
    return P / (sigma2 * dot)


def _initial_upper_bracket(ch: ChannelSet, cfg: SystemConfig) -> float:
    # interference-free single-user bound, grown later if ever feasible
    beta_max = float(ch.beta_flat().max())
    gamma_min = float(cfg.gamma_flat().min())
    return cfg.P * beta_max * ch.N / (cfg.sigma2 * gamma_min)


def solve_mmf_bisection(
    ch: ChannelSet,
    cfg: SystemConfig,
    qos_method: str = "opt-sca",
    tol_t: float = 1e-3,
    seed: int = 0,
    max_steps: int = 80,
) -> tuple[list, float, SolverReport]:
    """Maximize the worst SINR-to-target ratio under the power budget.

    Bisects over the common target scale t, solving the QoS problem at
    targets t*gamma each step; a step counts feasible when the solver
    succeeds at power <= P, and any failure shrinks the upper bracket.
    The final beamformers are rescaled to use the full budget and the
    returned t_star is the worst ratio recomputed from them.
    """
    if qos_method not in MMF_QOS_METHODS:
        raise ValueError(f"qos_method must be one of {MMF_QOS_METHODS}")
    t0 = time.perf_counter()

    def probe(t):
        try:
            sol, _ = solve_qos(
                ch, cfg.with_targets(cfg.scaled_targets(t)),
                method=qos_method, seed=seed, fp_max_iter=3000,
            )
        except McbeamError:
            return None
        return sol

    t_hi = _initial_upper_bracket(ch, cfg)
    for _ in range(60):
        sol = probe(t_hi)
        if sol is None or sol.metrics["power"] > cfg.P:
            break
        t_hi *= 2.0
    t_lo, best, steps = 0.0, None, 0
    for steps in range(1, max_steps + 1):
        t_mid = 0.5 * (t_lo + t_hi)
        sol = probe(t_mid)
        if sol is not None and sol.metrics["power"] <= cfg.P:
            t_lo, best = t_mid, (t_mid, sol)
            if abs(sol.metrics["power"] - cfg.P) <= tol_t * cfg.P:
                break
        else:
            t_hi = t_mid
        if (t_hi - t_lo) <= tol_t * max(t_hi, 1e-12):
            break
    if best is None:
        raise Infeasible("no positive target scale fits the power budget")

    t_bis, sol = best
    scale = np.sqrt(cfg.P / sol.metrics["power"])
    w = [scale * wi for wi in sol.w]
    t_star = min_sinr_ratio(w, ch, cfg.gamma, cfg.sigma2)
    # channel projections implied by the weights through the structured
    # relation a = lam * delta * (1 + t gamma); they equal the measured
    # projections h^H w exactly at a true optimum
    delta_implied = [
        np.asarray(ai) / (np.asarray(l) * (1.0 + t_bis * np.asarray(g)))
        for ai, l, g in zip(sol.weights.a, sol.lam, cfg.gamma)
    ]
    rep = SolverReport(
        status=OPTIMAL,
        iterations=steps,
        objective=t_star,
        residual=abs(sol.metrics["power"] - cfg.P) / cfg.P,
        extra={
            "t_bisection": t_bis,
            "lam": sol.lam,
            "delta": sol.weights.delta,
            "delta_implied": delta_implied,
            "power_before_rescale": sol.metrics["power"],
            "qos_method": qos_method,
        },
    )
    rep.wall_ms = (time.perf_counter() - t0) * 1e3
    return w, t_star, rep


def assemble_mmf(lam: list, delta: list, ch: ChannelSet, cfg: SystemConfig,
                 t: float | None = None) -> list:
    """Fairness-problem beamformers from QoS multipliers and channel projections.

    Reparameterizes the structured QoS solution at targets t*gamma:
    covariance weights lam * (t gamma) and channel weights
    lam * delta * (1 + t gamma).  With t omitted it is taken from the
    multiplier identity t = P / (sigma2 lam^T gamma), exact at the
    fairness optimum.
    """
    if t is None:
        t = mmf_objective_from_multipliers(lam, cfg.gamma, cfg.sigma2, cfg.P)
    targets = cfg.scaled_targets(t)
    a = [np.asarray(l) * np.asarray(d) * (1.0 + np.asarray(g))
         for l, d, g in zip(lam, delta, targets)]
    return assemble_beamformer(lam, a, ch, targets)


def _equal_target(cfg: SystemConfig) -> float:
    g = cfg.gamma_flat()
    if not np.all(g == g[0]):
        raise UnequalTargets("large-array fairness shortcuts need equal targets")
    return float(g[0])


def _asym_cov_weights(ch: ChannelSet, cfg: SystemConfig) -> np.ndarray:
    beta = ch.beta_flat()
    beta_h = harmonic_mean(beta)
    return cfg.P * beta_h / (cfg.sigma2 * ch.K_tot * beta)


def assemble_from_cov_weights(d_flat: np.ndarray, a: list, ch: ChannelSet) -> list:
    """Solve (I + sum d_u h_u h_u^H) w_i = H_i a_i for each group."""
    H = ch.stacked()
    R = np.eye(ch.N, dtype=complex) + (H * np.asarray(d_flat)[None, :]) @ herm(H)
    rhs = np.column_stack([Hi @ np.asarray(ai, dtype=complex)
                           for Hi, ai in zip(ch.H, a)])
    sol = hermitian_solve(hermitize(R), rhs)
    return [sol[:, i] for i in range(ch.G)]


def asym_mmf_sca(
    ch: ChannelSet,
    cfg: SystemConfig,
    tol_t: float = 1e-3,
    seed: int = 0,
    max_steps: int = 80,
) -> tuple[list, float, SolverReport]:
    """Fairness solve against the fixed large-array covariance.

    The t-dependent covariance is replaced by its closed-form limit
    (equal targets only), so each bisection step optimizes the weights
    alone; beamformers are assembled against that fixed covariance and
    rescaled to the power budget.
    """
    _equal_target(cfg)
    t0 = time.perf_counter()
    d_flat = _asym_cov_weights(ch, cfg)
    rp = reduced_problem_from_cov_weights(ch, d_flat, cfg.gamma, cfg.sigma2,
                                          use_basis_reduction=ch.N > max(ch.K))

    def probe(t):
        rpt = replace(rp, gamma=[t * g for g in rp.gamma])
        try:
            gw, _, _ = solve_weights_sdr(rpt, seed=seed)
            gw, _ = solve_weights_sca(rpt, gw)
        except McbeamError:
            return None
        return gw, rpt.power(gw.a)

    t_hi = _initial_upper_bracket(ch, cfg)
    for _ in range(60):
        out = probe(t_hi)
        if out is None or out[1] > cfg.P:
            break
        t_hi *= 2.0
    t_lo, best, steps = 0.0, None, 0
    for steps in range(1, max_steps + 1):
        t_mid = 0.5 * (t_lo + t_hi)
        out = probe(t_mid)
        if out is not None and out[1] <= cfg.P:
            t_lo, best = t_mid, out
            if abs(out[1] - cfg.P) <= tol_t * cfg.P:
                break
        else:
            t_hi = t_mid
        if (t_hi - t_lo) <= tol_t * max(t_hi, 1e-12):
            break
    if best is None:
        raise Infeasible("no positive target scale fits the power budget")
    gw, power = best
    a = rp.to_channel_weights(gw.a)
    w = assemble_from_cov_weights(d_flat, a, ch)
    w = [np.sqrt(cfg.P / total_power(w)) * wi for wi in w]
    t_star = min_sinr_ratio(w, ch, cfg.gamma, cfg.sigma2)
    rep = SolverReport(status=OPTIMAL, iterations=steps, objective=t_star)
    rep.wall_ms = (time.perf_counter() - t0) * 1e3
    return w, t_star, rep


def cf_asym_mmf(ch: ChannelSet, cfg: SystemConfig) -> list:
    """Closed-form large-array fairness beamformer; no iteration at all.

    Weights are the inverse channel variances of each group's users; the
    group power split P_i = (K_i beta_h / (K_tot beta_h_i)) P assigns each
    group its share of the total inverse-variance mass, and the scale
    factor c_i realizes exactly that split.
    """
    _equal_target(cfg)
    d_flat = _asym_cov_weights(ch, cfg)
    beta = ch.beta_flat()
    beta_h = harmonic_mean(beta)
    q = [1.0 / np.atleast_1d(np.asarray(b, dtype=float)) for b in ch.beta]
    v = assemble_from_cov_weights(d_flat, q, ch)
    w = []
    for i, vi in enumerate(v):
        beta_h_i = harmonic_mean(np.atleast_1d(ch.beta[i]))
        share = ch.K[i] * beta_h / (ch.K_tot * beta_h_i) * cfg.P
        w.append(np.sqrt(share) / np.linalg.norm(vi) * vi)
    return w


def mmf_upper_bound(ch: ChannelSet, cfg: SystemConfig, tol_t: float = 1e-3,
                    max_steps: int = 80) -> float:
    """Upper bound on the achievable worst target ratio at budget P.

    Bisection over t against the relaxed QoS optimum: whenever even the
    relaxation needs more than P at targets t*gamma, no beamformer
    reaches ratio t.  Returns the infeasible-side bracket end.
    """
    def relaxed_power(t):
        try:
            val, _ = qos_sdr_lower_bound(ch, cfg, gamma=cfg.scaled_targets(t))
        except Infeasible:
            return np.inf
        return val

    t_hi = _initial_upper_bracket(ch, cfg)
    for _ in range(60):
        if relaxed_power(t_hi) > cfg.P:
            break
        t_hi *= 2.0
    t_lo = 0.0
    for _ in range(max_steps):
        if (t_hi - t_lo) <= tol_t * max(t_hi, 1e-12):
            break
        t_mid = 0.5 * (t_lo + t_hi)
        if relaxed_power(t_mid) <= cfg.P:
            t_lo = t_mid
        else:
            t_hi = t_mid
    return t_hi

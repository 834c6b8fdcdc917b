"""Experiment runner: Monte Carlo sweeps over scenario parameters.

Each table row is one (method, parameter value, trial) instance; the
logged per-instance seed reproduces the row through a direct library
call.  Wall times cover only the solve stage, never channel generation
or I/O.
"""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .direct import direct_sca_qos, direct_sdr_qos, qos_sdr_lower_bound
from .errors import McbeamError
from .mmf import asym_mmf_sca, cf_asym_mmf, mmf_upper_bound, solve_mmf_bisection
from .qos import meets_targets, min_sinr_ratio, sinr, total_power
from .scenario import Scenario, lin2db, make_config
from .weights import solve_qos

QOS_BENCH_METHODS = ("opt-sdr", "opt-sca", "asym-sca", "direct-sdr",
                     "direct-sca", "lower-bound")
MMF_BENCH_METHODS = ("qos2mmf-sdr", "qos2mmf-sca", "asym-sca", "cf-asym",
                     "upper-bound")

CSV_COLUMNS = ("method", "param_name", "param_value", "trial", "seed",
               "objective_db", "power_db", "min_sinr_db", "feasible",
               "iters", "wall_ms")

SWEEP_PARAMS = ("N", "K", "G")


def instance_seed(base_seed: int, param_index: int, trial: int) -> int:
    """Deterministic per-instance seed; loggable and directly reusable."""
    ss = np.random.SeedSequence(entropy=int(base_seed),
                                spawn_key=(int(param_index), int(trial)))
    lo, hi = ss.generate_state(2, np.uint32)
    return int(hi) << 32 | int(lo)


def apply_param(sc: Scenario, name: str, value: int) -> Scenario:
    """Scenario with one dimension replaced (N, per-group K, or G)."""
    if name not in SWEEP_PARAMS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    gdb = sc.gamma_db_raw
    if gdb is not None and not np.isscalar(gdb) and name != "N":
        raise ValueError("K/G sweeps need a scalar target; per-user targets "
                         "fix the user count")
    if gdb is None:
        gdb = lin2db(sc.cfg.gamma_flat())
        gdb = float(gdb[0]) if np.allclose(gdb, gdb[0]) else gdb.tolist()
    cfg = sc.cfg
    dims = {"N": cfg.N, "K": cfg.K[0], "G": cfg.G}
    dims[name] = int(value)
    new_cfg = make_config(G=dims["G"], K=dims["K"], N=dims["N"], gamma_db=gdb,
                          sigma2=cfg.sigma2, P=cfg.P)
    return Scenario(cfg=new_cfg, channel_model=sc.channel_model, seed=sc.seed,
                    gamma_db_raw=gdb)


def _nan_row(method, param_name, param_value, trial, seed):
    return {
        "method": method, "param_name": param_name, "param_value": param_value,
        "trial": trial, "seed": seed, "objective_db": float("nan"),
        "power_db": float("nan"), "min_sinr_db": float("nan"),
        "feasible": False, "iters": 0, "wall_ms": 0.0,
    }


def run_qos_instance(sc: Scenario, method: str, seed: int,
                     direct_cap: int = 64, n_rand: int = 300) -> dict:
    """One QoS solve; returns metric fields (no sweep bookkeeping)."""
    cfg = sc.cfg
    ch = sc.channels(seed=seed)
    t0 = time.perf_counter()
    if method in ("opt-sdr", "opt-sca", "asym-sca"):
        sol, rep = solve_qos(ch, cfg, method=method, seed=seed, n_rand=n_rand)
        w, iters = sol.w, rep.iterations
    elif method == "direct-sdr":
        w, _, rep = direct_sdr_qos(ch, cfg, seed=seed, n_cap=direct_cap,
                                   n_rand=n_rand)
        iters = rep.iterations
    elif method == "direct-sca":
        z0, _, rep0 = direct_sdr_qos(ch, cfg, seed=seed, n_cap=direct_cap,
                                     n_rand=n_rand)
        w, rep = direct_sca_qos(ch, cfg, z0)
        iters = rep0.iterations + rep.iterations
    elif method == "lower-bound":
        bound, rep = qos_sdr_lower_bound(ch, cfg)
        wall = (time.perf_counter() - t0) * 1e3
        pdb = float(10.0 * np.log10(bound / cfg.sigma2))
        return {"objective_db": pdb, "power_db": pdb,
                "min_sinr_db": float("nan"), "feasible": True,
                "iters": rep.iterations, "wall_ms": wall}
    else:
        raise ValueError(f"unknown QoS method {method!r}")
    wall = (time.perf_counter() - t0) * 1e3
    power = total_power(w)
    pdb = float(10.0 * np.log10(power / cfg.sigma2))
    smin = min(float(np.min(v)) for v in sinr(w, ch, cfg.sigma2))
    return {"objective_db": pdb, "power_db": pdb,
            "min_sinr_db": float(10.0 * np.log10(smin)),
            "feasible": bool(meets_targets(w, ch, cfg.gamma, cfg.sigma2)),
            "iters": iters, "wall_ms": wall}


def run_mmf_instance(sc: Scenario, method: str, seed: int) -> dict:
    cfg = sc.cfg
    ch = sc.channels(seed=seed)
    t0 = time.perf_counter()
    iters = 0
    if method in ("qos2mmf-sdr", "qos2mmf-sca"):
        qm = "opt-sdr" if method.endswith("sdr") else "opt-sca"
        w, t_star, rep = solve_mmf_bisection(ch, cfg, qos_method=qm, seed=seed)
        iters = rep.iterations
    elif method == "asym-sca":
        w, t_star, rep = asym_mmf_sca(ch, cfg, seed=seed)
        iters = rep.iterations
    elif method == "cf-asym":
        w = cf_asym_mmf(ch, cfg)
        t_star = min_sinr_ratio(w, ch, cfg.gamma, cfg.sigma2)
    elif method == "upper-bound":
        t_star = mmf_upper_bound(ch, cfg)
        wall = (time.perf_counter() - t0) * 1e3
        sdb = float(10.0 * np.log10(t_star * float(cfg.gamma_flat().min())))
        return {"objective_db": sdb, "power_db": float("nan"),
                "min_sinr_db": sdb, "feasible": True, "iters": 0,
                "wall_ms": wall}
    else:
        raise ValueError(f"unknown MMF method {method!r}")
    wall = (time.perf_counter() - t0) * 1e3
    power = total_power(w)
    smin = min(float(np.min(v)) for v in sinr(w, ch, cfg.sigma2))
    sdb = float(10.0 * np.log10(smin))
    return {"objective_db": sdb,
            "power_db": float(10.0 * np.log10(power / cfg.sigma2)),
            "min_sinr_db": sdb,
            "feasible": bool(power <= cfg.P * (1.0 + 1e-8)),
            "iters": iters, "wall_ms": wall}


def _worker(item):
    kind, sc, method, name, value, trial, seed, direct_cap = item
    try:
        varied = apply_param(sc, name, value)
        if kind == "qos":
            fields = run_qos_instance(varied, method, seed, direct_cap=direct_cap)
        else:
            fields = run_mmf_instance(varied, method, seed)
        row = {"method": method, "param_name": name, "param_value": value,
               "trial": trial, "seed": seed, **fields}
    except (McbeamError, ValueError) as exc:
        row = _nan_row(method, name, value, trial, seed)
        row["error"] = type(exc).__name__
    return row


def run_sweep(
    kind: str,
    sc: Scenario,
    methods: list,
    param_name: str,
    values: list,
    trials: int = 20,
    seed: int = 0,
    jobs: int = 1,
    direct_cap: int = 64,
) -> list:
    """Run a Monte Carlo sweep; returns rows ordered by (method, value, trial)."""
    known = QOS_BENCH_METHODS if kind == "qos" else MMF_BENCH_METHODS
    for m in methods:
        if m not in known:
            raise ValueError(f"unknown {kind} method {m!r}")
    items = []
    for method in methods:
        for pi, value in enumerate(values):
            for trial in range(trials):
                items.append((kind, sc, method, param_name, value, trial,
                              instance_seed(seed, pi, trial), direct_cap))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_worker, items))
    else:
        rows = [_worker(it) for it in items]
    rows.sort(key=lambda r: (methods.index(r["method"]),
                             r["param_value"], r["trial"]))
    return rows


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def rows_to_csv(rows: list, include_timing: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        r = dict(r)
        if not include_timing:
            r["wall_ms"] = 0.0
        writer.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def summarize(rows: list, field: str = "power_db") -> dict:
    """Mean and standard error of a column per (method, param_value)."""
    out = {}
    for r in rows:
        key = (r["method"], r["param_value"])
        out.setdefault(key, []).append(r[field])
    summary = {}
    for key, vals in out.items():
        v = np.array([x for x in vals if np.isfinite(x)])
        n_fail = len(vals) - v.size
        if v.size:
            stderr = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
            summary[key] = {"mean": float(v.mean()), "stderr": stderr,
                            "n": int(v.size), "failed": n_fail}
        else:
            summary[key] = {"mean": float("nan"), "stderr": float("nan"),
                            "n": 0, "failed": n_fail}
    return summary

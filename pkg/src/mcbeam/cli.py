"""Command-line interface: single solves, Monte Carlo sweeps, validation."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .bench import (
    MMF_BENCH_METHODS,
    QOS_BENCH_METHODS,
    instance_seed,
    apply_param,
    rows_to_csv,
    run_sweep,
)
from .checks import run_validation
from .direct import direct_sca_qos, direct_sdr_qos
from .errors import McbeamError
from .mmf import asym_mmf_sca, cf_asym_mmf, mmf_upper_bound, solve_mmf_bisection
from .qos import min_sinr_ratio, sinr, total_power
from .scenario import default_scenario, lin2db, load_scenario
from .weights import solve_qos

QOS_CLI_METHODS = ("opt-sdr", "opt-sca", "asym-sca", "direct-sdr", "direct-sca")
MMF_CLI_METHODS = ("qos2mmf-sdr", "qos2mmf-sca", "asym-sca", "cf-asym",
                   "upper-bound")


def _interleave(v: np.ndarray) -> list:
    out = np.empty(2 * v.shape[0])
    out[0::2] = v.real
    out[1::2] = v.imag
    return out.tolist()


def _config_doc(sc) -> dict:
    return {
        "G": sc.cfg.G, "K": list(sc.cfg.K), "N": sc.cfg.N,
        "gamma_db": sc.gamma_db_raw if sc.gamma_db_raw is not None
        else lin2db(sc.cfg.gamma_flat()).tolist(),
        "sigma2": sc.cfg.sigma2, "P": sc.cfg.P,
        "channel_model": sc.channel_model, "seed": sc.seed,
    }


def _report_doc(rep) -> dict:
    return {
        "status": rep.status,
        "iterations": rep.iterations,
        "residual": None if np.isnan(rep.residual) else rep.residual,
        "wall_ms": rep.wall_ms,
    }


def _load(args):
    sc = load_scenario(args.config) if args.config else default_scenario()
    if args.seed is not None:
        sc.seed = args.seed
    return sc


def _write_json(path, doc):
    text = json.dumps(doc, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_solve_qos(args) -> int:
    sc = _load(args)
    cfg = sc.cfg
    ch = sc.channels()
    doc = {"config": _config_doc(sc), "method": args.method}
    if args.method in ("opt-sdr", "opt-sca", "asym-sca"):
        sol, rep = solve_qos(ch, cfg, method=args.method, seed=sc.seed,
                             n_rand=args.n_rand)
        w = sol.w
        doc["lambda"] = [l.tolist() for l in sol.lam]
        doc["a"] = [_interleave(ai) for ai in sol.weights.a]
    elif args.method == "direct-sdr":
        w, lower, rep = direct_sdr_qos(ch, cfg, seed=sc.seed,
                                       n_cap=args.direct_cap,
                                       n_rand=args.n_rand)
        doc["lower_bound"] = lower
    else:
        z0, _, rep0 = direct_sdr_qos(ch, cfg, seed=sc.seed,
                                     n_cap=args.direct_cap, n_rand=args.n_rand)
        w, rep = direct_sca_qos(ch, cfg, z0)
    power = total_power(w)
    vals = sinr(w, ch, cfg.sigma2)
    doc["w"] = [_interleave(wi) for wi in w]
    doc["metrics"] = {
        "power": power,
        "power_db": float(10 * np.log10(power / cfg.sigma2)),
        "min_sinr_db": float(10 * np.log10(min(v.min() for v in vals))),
        "sinr_db": [(10 * np.log10(v)).tolist() for v in vals],
        "min_target_ratio": min_sinr_ratio(w, ch, cfg.gamma, cfg.sigma2),
    }
    doc["report"] = _report_doc(rep)
    _write_json(args.out, doc)
    return 0


def cmd_solve_mmf(args) -> int:
    sc = _load(args)
    cfg = sc.cfg
    ch = sc.channels()
    doc = {"config": _config_doc(sc), "method": args.method}
    if args.method == "upper-bound":
        t = mmf_upper_bound(ch, cfg, tol_t=args.tol_t)
        doc["metrics"] = {
            "t_upper_bound": t,
            "min_sinr_db_bound": float(
                10 * np.log10(t * cfg.gamma_flat().min())),
        }
        _write_json(args.out, doc)
        return 0
    if args.method in ("qos2mmf-sdr", "qos2mmf-sca"):
        qm = "opt-sdr" if args.method.endswith("sdr") else "opt-sca"
        w, t_star, rep = solve_mmf_bisection(ch, cfg, qos_method=qm,
                                             tol_t=args.tol_t, seed=sc.seed)
        doc["lambda"] = [l.tolist() for l in rep.extra["lam"]]
        doc["report"] = _report_doc(rep)
    elif args.method == "asym-sca":
        w, t_star, rep = asym_mmf_sca(ch, cfg, tol_t=args.tol_t, seed=sc.seed)
        doc["report"] = _report_doc(rep)
    else:
        w = cf_asym_mmf(ch, cfg)
        t_star = min_sinr_ratio(w, ch, cfg.gamma, cfg.sigma2)
    power = total_power(w)
    vals = sinr(w, ch, cfg.sigma2)
    doc["w"] = [_interleave(wi) for wi in w]
    doc["metrics"] = {
        "power": power,
        "t_star": t_star,
        "min_sinr_db": float(10 * np.log10(min(v.min() for v in vals))),
        "power_budget": cfg.P,
    }
    _write_json(args.out, doc)
    return 0


def _parse_sweep(text: str):
    name, _, vals = text.partition("=")
    if not vals:
        raise argparse.ArgumentTypeError("sweep must look like N=50,100,200")
    return name.strip(), [int(v) for v in vals.split(",")]


def cmd_bench(args) -> int:
    sc = _load(args)
    name, values = args.sweep
    default_methods = {
        "qos": ["opt-sdr", "opt-sca", "direct-sdr", "direct-sca"],
        "mmf": ["qos2mmf-sdr", "qos2mmf-sca", "cf-asym", "upper-bound"],
    }[args.problem]
    methods = args.methods.split(",") if args.methods else default_methods
    trials = 100 if args.full_scale else args.trials
    rows = run_sweep(args.problem, sc, methods, name, values, trials=trials,
                     seed=args.seed if args.seed is not None else sc.seed,
                     jobs=args.jobs, direct_cap=args.direct_cap)
    text = rows_to_csv(rows, include_timing=not args.no_timing)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_validate(args) -> int:
    results = run_validation(seed=args.seed)
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        failed += not r.passed
        print(f"{r.name:<{width}}  {mark}  margin={r.margin:+.3e}  "
              f"[{r.wall_ms:8.1f} ms]  {r.detail}")
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mcbeam",
        description="Multi-group multicast beamforming solvers and benchmarks",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-qos", help="minimize power subject to SINR targets")
    p.add_argument("--config", help="scenario JSON (default: built-in scenario)")
    p.add_argument("--method", choices=QOS_CLI_METHODS, default="opt-sca")
    p.add_argument("--seed", type=int, default=None,
                   help="channel seed (overrides the scenario file)")
    p.add_argument("--out", help="write the result JSON here instead of stdout")
    p.add_argument("--n-rand", type=int, default=300)
    p.add_argument("--direct-cap", type=int, default=64,
                   help="largest N the direct relaxation will accept")
    p.set_defaults(func=cmd_solve_qos)

    p = sub.add_parser("solve-mmf", help="maximize the worst SINR-to-target ratio")
    p.add_argument("--config", help="scenario JSON (default: built-in scenario)")
    p.add_argument("--method", choices=MMF_CLI_METHODS, default="qos2mmf-sca")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--tol-t", type=float, default=1e-3)
    p.set_defaults(func=cmd_solve_mmf)

    p = sub.add_parser("bench", help="Monte Carlo sweeps to CSV")
    p.add_argument("problem", choices=("qos", "mmf"))
    p.add_argument("--config")
    p.add_argument("--methods", help="comma-separated method list")
    p.add_argument("--sweep", type=_parse_sweep, required=True,
                   metavar="PARAM=V1,V2,...", help="e.g. N=50,100,200")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--full-scale", action="store_true",
                   help="use 100 trials per cell")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--direct-cap", type=int, default=64)
    p.add_argument("--no-timing", action="store_true",
                   help="zero the wall_ms column for byte-reproducible output")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="run the full property suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except McbeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.  Exit codes: 0 success/pass, 2 protocol abort, 1 error."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .core import JointDistribution, counts_from_stream, lr_vertices, pr_boxes
from .errors import Abort, BellcertError

EXIT_OK, EXIT_ERROR, EXIT_ABORT = 0, 1, 2


def _emit(obj, path=None):
    from .fileio import write_json

    if path:
        write_json(path, obj)
    print(json.dumps(obj, indent=2))


def _named_table(name: str) -> JointDistribution:
    from .data import xor3_ns_fit

    if name == "xor3_ns_fit":
        return xor3_ns_fit()
    if name.startswith("pr") and name[2:].isdigit():
        return pr_boxes()[int(name[2:])]
    if name.startswith("lr") and name[2:].isdigit():
        return lr_vertices()[int(name[2:])]
    raise ValueError(f"unknown table name {name!r} (use xor3_ns_fit, pr0..pr7, lr0..lr15)")


def _table(obj) -> JointDistribution:
    from .fileio import table_from_dict

    if isinstance(obj, str):
        return _named_table(obj)
    return JointDistribution(table_from_dict(obj))


def load_sim_spec(path):
    """JSON {"mixture": [{"weight": w, "table": T}, ...]} or {"schedule": [{"length": L, "table": T}, ...]};
    T is a 16-entry "a,b,x,y" object or a name such as "xor3_ns_fit", "pr0", "lr0"."""
    from .fileio import read_json
    from .simulate import DriftSchedule, MixtureSpec

    obj = read_json(path)
    if "mixture" in obj:
        return MixtureSpec(tuple((c["weight"], _table(c["table"])) for c in obj["mixture"]))
    if "schedule" in obj:
        return DriftSchedule(tuple((c["length"], _table(c["table"])) for c in obj["schedule"]))
    raise ValueError("spec needs a 'mixture' or 'schedule' key")


# ---------------------------------------------------------------- subcommands

def cmd_estimate(args):
    from .fileio import read_trials, table_to_dict
    from .mle import MleConfig, fit_nonsignaling

    codes = read_trials(args.inp, skip=args.skip, take=args.take)
    res = fit_nonsignaling(counts_from_stream(codes), MleConfig())
    _emit({"q": table_to_dict(res.q.p), "log_likelihood": res.log_likelihood, "iterations": res.iterations,
           "newton_steps": res.newton_steps, "converged": res.converged, "trials": int(codes.size)}, args.out)
    return EXIT_OK


def cmd_pbr(args):
    from .fileio import load_distribution, table_to_dict
    from .pbr import asymptotic_rate, compute_m, log_moments, optimize_bell_function

    q = load_distribution(args.q)
    t = optimize_bell_function(q, free_00=args.free_00)
    bound = compute_m(t)
    mu, sigma2 = log_moments(t, q)
    _emit({"t": table_to_dict(t.t), "m": bound.m, "achieving_vertex": bound.achieving_vertex, "mu": mu,
           "sigma2": sigma2, "asymptotic_rate": asymptotic_rate(t, q, bound.m)}, args.out)
    return EXIT_OK


def cmd_plan_threshold(args):
    from .fileio import load_bell_function, load_distribution
    from .pbr import choose_vthresh

    tp = choose_vthresh(load_bell_function(args.t), load_distribution(args.q), args.n, args.quantile)
    v = tp.v_thresh if tp.v_thresh != float("inf") else None  # JSON has no infinity
    _emit({"ln_vthresh": tp.ln_vthresh, "v_thresh": v, "mu": tp.mu, "sigma2": tp.sigma2,
           "quantile": tp.quantile, "n": tp.n, "z": tp.z}, args.out)
    return EXIT_OK


def _params_from_json(path, n):
    import math

    from .entropy import ProtocolParams
    from .fileio import read_json

    obj = read_json(path)
    ln_v = obj["ln_vthresh"] if "ln_vthresh" in obj else math.log(obj["v_thresh"])
    return ProtocolParams(n=int(n if n is not None else obj["n"]), m=float(obj["m"]), eps_p=float(obj["eps_p"]),
                          ln_vthresh=float(ln_v))


def cmd_run(args):
    from dataclasses import asdict

    from .entropy import compute_delta, run_protocol, validate_params
    from .errors import InvalidParams
    from .extractor import outcome_bits
    from .fileio import load_bell_function, read_trials, sha256_file, write_bits

    params = _params_from_json(args.params, args.n)
    bad = validate_params(params)
    if bad:
        raise InvalidParams("; ".join(bad))
    codes = read_trials(args.inp, skip=args.skip, take=params.n)
    res = run_protocol(codes, load_bell_function(args.t), params)
    report = {"params": asdict(params), "protocol": asdict(res),
              "inputs": {"trials_sha256": sha256_file(args.inp), "skip": args.skip}}
    if res.passed:
        cert = compute_delta(params)
        report["certificate"] = {"delta_log2": cert.delta_log2, "entropy_bits": cert.entropy_bits}
        if args.outcomes:
            write_bits(args.outcomes, outcome_bits(codes))
            report["outcomes_sha256"] = sha256_file(args.outcomes)
    _emit(report, args.report)
    return EXIT_OK if res.passed else EXIT_ABORT


def cmd_extract(args):
    from .extractor import build_weak_design, extract, max_output_bits, plan
    from .fileio import read_bits, sha256_file, write_bits

    x = read_bits(args.inp)
    seed = read_bits(args.seed)
    t_max = max_output_bits(args.delta_log2, args.kappa, args.eps_ext)
    if t_max < args.t:
        print(f"certified entropy supports only {t_max} bits (< {args.t})", file=sys.stderr)
        return EXIT_ABORT
    sigma = -args.delta_log2 - 1 + np.log2(args.kappa) + np.log2(args.eps_ext)
    p = plan(x.size, args.t, args.eps_ext / 2, sigma=float(sigma))
    if seed.size < p.d:
        raise ValueError(f"seed has {seed.size} bits, extractor needs d = {p.d}")
    design = build_weak_design(p.t, p.w, p.blocks)
    out = extract(x, seed[:p.d], p, design)
    write_bits(args.out, out)
    _emit({"q": p.q, "t": p.t, "l": p.l, "w": p.w, "blocks": p.blocks, "d": p.d, "max_output_bits": t_max,
           "output_sha256": sha256_file(args.out)})
    return EXIT_OK


def cmd_stats(args):
    from dataclasses import asdict

    from .fileio import read_trials
    from .stats import all_reports

    counts = counts_from_stream(read_trials(args.inp))
    _emit({"tests": [asdict(r) for r in all_reports(counts)], "counts": counts.grid().tolist()}, args.report)
    return EXIT_OK


def cmd_simulate(args):
    from .fileio import write_trials
    from .simulate import sample_stream

    codes = sample_stream(load_sim_spec(args.spec), args.n, args.seed)
    write_trials(args.out, codes)
    print(json.dumps({"trials": int(codes.size), "out": args.out}))
    return EXIT_OK


def cmd_compare_pm(args):
    from .fileio import load_distribution
    from .pm import PmBoundInputs, chsh_function, pm_min_trials, pr_weight

    q = load_distribution(args.q)
    dec = pr_weight(q)
    out = {"p": dec.p, "pr_index": dec.pr_index, "chsh_expectation": float(np.sum(q.p * chsh_function())),
           "min_trials": pm_min_trials(PmBoundInputs(dec.p, args.eps)) if dec.p > 0 else None}
    _emit(out, args.out)
    return EXIT_OK


def cmd_full_run(args):
    from .fileio import read_json
    from .pipeline import RunConfig, full_run

    cfg = dict(read_json(args.config)) if args.config else {}
    overrides = {"trials_path": args.inp, "seed_path": args.seed, "dev_seed": args.dev_seed,
                 "train_count": args.train, "eps_fin": args.eps_fin, "kappa": args.kappa, "target_t": args.t,
                 "quantile": args.quantile, "eps_split_ratio": args.ratio, "budget_convention": args.convention,
                 "n": args.n, "report_path": args.report, "output_path": args.out}
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if args.free_00:
        cfg["free_00"] = True
    try:
        report = full_run(RunConfig.from_dict(cfg))
    except Abort as ab:
        print(f"abort: {ab.reason}", file=sys.stderr)
        return EXIT_ABORT
    print(json.dumps({"status": report.status, "output": report.output,
                      "entropy_bits": report.certificate["entropy_bits"]}, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bellcert", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="maximum-likelihood non-signaling fit to trial counts")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--skip", type=int, default=0)
    p.add_argument("--take", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("pbr", help="optimize a Bell function for a distribution")
    p.add_argument("--q", required=True)
    p.add_argument("--out")
    p.add_argument("--free-00", action="store_true", help="do not pin T(0,0,x,y) to 1")
    p.set_defaults(func=cmd_pbr)

    p = sub.add_parser("plan-threshold", help="CLT threshold for the running product")
    p.add_argument("--t", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--quantile", type=float, default=0.95)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan_threshold)

    p = sub.add_parser("run", help="running product with the freeze rule, plus the certificate on a pass")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--skip", type=int, default=0)
    p.add_argument("--n", type=int)
    p.add_argument("--t", required=True)
    p.add_argument("--params", required=True, help="JSON with m, eps_p and ln_vthresh (or v_thresh)")
    p.add_argument("--report")
    p.add_argument("--outcomes", help="write the protocol outcome bits here on a pass")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("extract", help="seeded extraction from outcome bits")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--seed", required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--eps-ext", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--delta-log2", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("stats", help="settings-bias, independence and signaling tests")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("simulate", help="write a synthetic trial file")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare-pm", help="PR-box weight, CHSH value and the CHSH-based trial bound")
    p.add_argument("--q", required=True)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare_pm)

    p = sub.add_parser("full-run", help="training, protocol and extraction end to end")
    p.add_argument("--config", help="RunConfig JSON; flags override its fields")
    p.add_argument("--in", dest="inp")
    p.add_argument("--seed")
    p.add_argument("--dev-seed", type=int, help="generate seed bits (simulations only; not certifiable)")
    p.add_argument("--train", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--eps-fin", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--t", type=int)
    p.add_argument("--quantile", type=float)
    p.add_argument("--ratio", type=float)
    p.add_argument("--convention", choices=("raw", "scaled"))
    p.add_argument("--free-00", action="store_true")
    p.add_argument("--report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_full_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("BELLCERT_THREADS")
    if threads:
        import numba

        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    try:
        return args.func(args)
    except (BellcertError, ValueError, OSError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

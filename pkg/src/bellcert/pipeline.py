"""End-to-end protocol: training split, estimation, Bell function, threshold,
running product, certificate, and extraction, with a JSON run report.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .core import as_codes, counts_from_stream
from .entropy import ProtocolParams, compute_delta, run_protocol, validate_params
from .errors import Abort, BellcertError, DegenerateInput, InvalidParams, NoViolationPossible, StageError
from .extractor import build_weak_design, extract, max_output_bits, outcome_bits, plan_for_protocol
from .fileio import read_bits, read_trials, sha256_file, table_to_dict, trial_count, write_bits, write_json
from .mle import MleConfig, fit_nonsignaling
from .pbr import asymptotic_rate, choose_vthresh, compute_m, optimize_bell_function

CONVENTIONS = ("raw", "scaled")


def resolve_error_budget(eps_fin: float, kappa: float, ratio: float, convention: str = "raw"):
    """Split eps_fin = eps_p / kappa + eps_ext into (eps_p, eps_ext).

    ``raw``: eps_p : eps_ext = ratio : 1 (reproduces the published XOR 3 split).
    ``scaled``: (eps_p / kappa) : eps_ext = ratio : 1.
    """
    if not 0 < eps_fin < 1 or not 0 < kappa <= 1:
        raise InvalidParams("need 0 < eps_fin < 1 and 0 < kappa <= 1")
    if not ratio > 0:
        raise InvalidParams("ratio must be positive")
    if convention == "raw":
        eps_ext = eps_fin / (ratio / kappa + 1.0)
        eps_p = ratio * eps_ext
    elif convention == "scaled":
        eps_ext = eps_fin / (ratio + 1.0)
        eps_p = kappa * (eps_fin - eps_ext)
    else:
        raise InvalidParams(f"unknown budget convention {convention!r}")
    return eps_p, eps_ext


@dataclass(frozen=True)
class RunConfig:
    train_count: int
    eps_fin: float
    kappa: float
    target_t: int
    quantile: float = 0.95
    eps_split_ratio: float = 9.0
    budget_convention: str = "raw"
    n: int | None = None  # protocol trials after the split; default: all remaining
    free_00: bool = False
    trials_path: str | None = None
    seed_path: str | None = None
    dev_seed: int | None = None
    report_path: str | None = None
    output_path: str | None = None

    def __post_init__(self):
        if self.train_count < 0:
            raise InvalidParams("train_count must be >= 0")
        if not 0 < self.kappa <= 1:
            raise InvalidParams("kappa must lie in (0, 1]")
        if self.target_t < 1:
            raise InvalidParams("target_t must be >= 1")
        if not 0 < self.quantile < 1:
            raise InvalidParams("quantile must lie in (0, 1)")
        if self.budget_convention not in CONVENTIONS:
            raise InvalidParams(f"budget_convention must be one of {CONVENTIONS}")

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise InvalidParams(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class RunReport:
    status: str = "running"  # "pass", "abort"
    abort_reason: str | None = None
    certifiable: bool = True
    version: str = __version__
    config: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    mle: dict | None = None
    bell_function: dict | None = None
    bound: dict | None = None
    threshold: dict | None = None
    params: dict | None = None
    protocol: dict | None = None
    certificate: dict | None = None
    extractor: dict | None = None
    output: dict | None = None
    timestamps: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "RunReport":
        return cls(**obj)


def dev_seed_bits(seed: int, n_bits: int) -> np.ndarray:
    """Seed bits from Philox for simulations only; such runs are not certifiable."""
    bg = np.random.Philox(key=np.uint64(seed & (2**64 - 1)))
    words = bg.random_raw((n_bits + 63) // 64).astype("<u8")
    return np.unpackbits(words.view(np.uint8), bitorder="little", count=n_bits)


class _Stages:
    def __init__(self, report: RunReport):
        self.report = report
        self.name = None

    def __call__(self, name):
        self.name = name
        self.report.timestamps[name] = time.time()
        return self

    def __enter__(self):
        return self

    def __exit__(self, kind, err, tb):
        if err is None or isinstance(err, (Abort, StageError)):
            return False
        if isinstance(err, (DegenerateInput, NoViolationPossible)):
            # no Bell violation can be certified from this training data
            raise Abort(f"{self.name}: {err}", self.report) from err
        if isinstance(err, (BellcertError, ValueError, OSError)):
            raise StageError(self.name, err) from err
        return False


def run_codes(codes, cfg: RunConfig, seed_bits=None, report: RunReport | None = None):
    """Run the protocol on in-memory trials.  Returns (report, output bits).

    ``seed_bits`` is an array of at least d bits or a callable d -> bits.

    Raises Abort (carrying the report) when the run does not pass or cannot
    support ``target_t`` bits.
    """
    report = report or RunReport(config=asdict(cfg))
    stage = _Stages(report)
    codes = as_codes(codes)

    with stage("ingest"):
        if codes.size < cfg.train_count + 1:
            raise ValueError(f"stream has {codes.size} trials, need at least train_count + 1 = {cfg.train_count + 1}")
        n = codes.size - cfg.train_count if cfg.n is None else int(cfg.n)
        if n < 1 or cfg.train_count + n > codes.size:
            raise ValueError(f"protocol needs {n} trials after the split, stream has {codes.size - cfg.train_count}")
        train, protocol = codes[:cfg.train_count], codes[cfg.train_count:cfg.train_count + n]
        eps_p, eps_ext = resolve_error_budget(cfg.eps_fin, cfg.kappa, cfg.eps_split_ratio, cfg.budget_convention)
        report.budget = {"eps_p": eps_p, "eps_ext": eps_ext, "convention": cfg.budget_convention,
                         "eps_fin": cfg.eps_fin, "kappa": cfg.kappa, "ratio": cfg.eps_split_ratio}

    with stage("estimate"):
        fit = fit_nonsignaling(counts_from_stream(train), MleConfig())
        q = fit.q
        report.mle = {"q": table_to_dict(q.p), "log_likelihood": fit.log_likelihood,
                      "iterations": fit.iterations, "newton_steps": fit.newton_steps, "converged": fit.converged}

    with stage("pbr"):
        t = optimize_bell_function(q, free_00=cfg.free_00)
        report.bell_function = {"t": table_to_dict(t.t), "objective": t.log_expectation(q)}

    with stage("bound"):
        bound = compute_m(t)
        report.bound = {"m": bound.m, "achieving_vertex": bound.achieving_vertex,
                        "asymptotic_rate": asymptotic_rate(t, q, bound.m)}

    with stage("threshold"):
        tp = choose_vthresh(t, q, n, cfg.quantile)
        report.threshold = {"ln_vthresh": tp.ln_vthresh, "mu": tp.mu,
                            "sigma2": tp.sigma2, "quantile": tp.quantile, "n": tp.n, "z": tp.z}

    with stage("validate"):
        params = ProtocolParams(n=n, m=bound.m, eps_p=eps_p, ln_vthresh=tp.ln_vthresh)
        # the certificate needs v_thresh <= (1 + 1.5m)^n / eps_p; a larger CLT target is lowered to that cap
        clamped = tp.ln_vthresh > params.ln_vthresh_max()
        if clamped:
            params = ProtocolParams(n=n, m=bound.m, eps_p=eps_p, ln_vthresh=params.ln_vthresh_max())
        report.threshold["clamped_to_max"] = clamped
        bad = validate_params(params)
        if bad:
            raise InvalidParams("; ".join(bad))
        report.params = asdict(params)

    with stage("protocol"):
        res = run_protocol(protocol, t, params)
        report.protocol = asdict(res)
        if not res.passed:
            raise Abort(f"running product stayed below v_thresh (ln V = {res.ln_v_final:.6g} < {tp.ln_vthresh:.6g})",
                        report)

    with stage("certificate"):
        cert = compute_delta(params)
        t_max = max_output_bits(cert.delta_log2, cfg.kappa, eps_ext)
        report.certificate = {"delta_log2": cert.delta_log2, "entropy_bits": cert.entropy_bits, "max_output_bits": t_max}
        if t_max < cfg.target_t:
            raise Abort(f"certified entropy supports {t_max} bits, fewer than target {cfg.target_t}", report)

    with stage("extract"):
        xplan = plan_for_protocol(n, cfg.target_t, eps_ext, cfg.kappa, cert.delta_log2)
        design = build_weak_design(xplan.t, xplan.w, xplan.blocks)
        if seed_bits is None:
            raise ValueError("no seed bits supplied")
        if callable(seed_bits):
            seed_bits = seed_bits(xplan.d)
        seed_bits = np.asarray(seed_bits, dtype=np.uint8)
        if seed_bits.size < xplan.d:
            raise ValueError(f"seed has {seed_bits.size} bits, extractor needs d = {xplan.d}")
        out = extract(outcome_bits(protocol), seed_bits[:xplan.d], xplan, design)
        report.extractor = {"q": xplan.q, "t": xplan.t, "eps": xplan.eps, "sigma": xplan.sigma, "l": xplan.l,
                            "w": xplan.w, "blocks": xplan.blocks, "d": xplan.d,
                            "entropy_sufficient": xplan.entropy_sufficient()}

    report.status = "pass"
    report.timestamps["done"] = time.time()
    return report, out


def full_run(cfg: RunConfig) -> RunReport:
    """File-based run.  The report is always written when a path is configured;
    output bits only when the run passes."""
    report = RunReport(config=asdict(cfg))
    stage = _Stages(report)
    try:
        with stage("ingest"):
            if not cfg.trials_path:
                raise ValueError("trials_path is required")
            total = trial_count(cfg.trials_path)
            if total < cfg.train_count + 1:
                raise ValueError(f"{cfg.trials_path} has {total} trials, need at least {cfg.train_count + 1}")
            report.inputs["trials_sha256"] = sha256_file(cfg.trials_path)
            codes = read_trials(cfg.trials_path)
            if cfg.seed_path:
                seed_bits = read_bits(cfg.seed_path)
                report.inputs["seed_sha256"] = sha256_file(cfg.seed_path)
            elif cfg.dev_seed is not None:
                seed_bits = None  # generated once d is known
                report.certifiable = False
            else:
                raise ValueError("either seed_path or dev_seed is required")
        if seed_bits is None:
            seed_bits = lambda d: dev_seed_bits(cfg.dev_seed, d)  # noqa: E731
        report, out = run_codes(codes, cfg, seed_bits=seed_bits, report=report)
    except Abort as ab:
        report.status = "abort"
        report.abort_reason = ab.reason
        _write_report(cfg, report)
        raise Abort(ab.reason, report) from None
    except StageError:
        report.status = "error"
        _write_report(cfg, report)
        raise
    if cfg.output_path:
        write_bits(cfg.output_path, out)
        report.output = {"path": cfg.output_path, "bits": int(out.size), "sha256": sha256_file(cfg.output_path)}
    _write_report(cfg, report)
    return report


def _write_report(cfg: RunConfig, report: RunReport):
    if cfg.report_path:
        write_json(cfg.report_path, report.to_dict())


def load_report(path) -> RunReport:
    import json

    return RunReport.from_dict(json.loads(Path(path).read_text()))

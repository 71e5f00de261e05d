"""Request handlers shared by the command line and the HTTP service.

Each handler takes plain Python data, runs one analysis and returns the
report as an ordered dict ready for :func:`localdiff.report.dumps`.
"""

from __future__ import annotations

import warnings

import numpy as np

from .classify import LabeledPoints, classify_test
from .core import DataError, KernelSpec, PooledSample, default_kmax, validate_sample
from .permutation import PermutationConfig, run_test
from .report import check_report, envelope, report_dict
from .simgen import Scenario, power_study
from .univariate import univariate_test
from .verify import run_suite

DEFAULTS = {
    "alpha": 0.05,
    "kernel": "rect",
    "beta": None,
    "K": None,
    "kmax": None,
    "perms": 999,
    "threads": 1,
    "one_sided": False,
    "emit_perm_stats": False,
}


def make_config(options: dict) -> PermutationConfig:
    """Build a test configuration; ``seed`` is mandatory."""
    opts = {**DEFAULTS, **{k: v for k, v in options.items() if v is not None}}
    if "seed" not in opts:
        raise ValueError("a seed is required")
    if opts["kernel"] in ("rect", "rectangular"):
        kernel = KernelSpec("rectangular")
    else:
        beta = 1.0 if opts["beta"] is None else float(opts["beta"])
        kernel = KernelSpec.parse(opts["kernel"], beta=beta, K=opts["K"])
    return PermutationConfig(
        B=int(opts["perms"]),
        alpha=float(opts["alpha"]),
        seed=int(opts["seed"]),
        kernel=kernel,
        k_max=None if opts["kmax"] is None else int(opts["kmax"]),
        one_sided=bool(opts["one_sided"]),
        threads=int(opts["threads"]),
        emit_perm_stats=bool(opts["emit_perm_stats"]),
    )


def two_sample(first, second) -> PooledSample:
    first = np.atleast_2d(np.asarray(first, dtype=np.float64))
    second = np.atleast_2d(np.asarray(second, dtype=np.float64))
    if first.shape[1] != second.shape[1]:
        raise DataError(f"first sample has d={first.shape[1]}, second has d={second.shape[1]}")
    flags = np.r_[np.ones(first.shape[0], int), np.full(second.shape[0], 2)]
    return validate_sample(np.vstack([first, second]), flags)


def handle_test(sample: PooledSample, options: dict) -> dict:
    out = report_dict(run_test(sample, make_config(options)), "test")
    check_report(out)
    return out


def handle_test1d(sample: PooledSample, options: dict) -> dict:
    out = report_dict(univariate_test(sample, make_config(options)), "test1d")
    check_report(out)
    return out


def handle_classify(points, y, lam: float, options: dict) -> dict:
    data = LabeledPoints(points, y, lam)
    out = report_dict(classify_test(data, make_config(options)), "classify")
    check_report(out)
    return out


def handle_verify(suite: str = "all", seed: int = 0, count: int = 100, nmax: int | None = None,
                  details: bool = False) -> dict:
    summaries = run_suite(suite, seed, count=count, n_max=nmax)
    return envelope("verify", {
        "config": {"suite": suite, "seed": int(seed), "count": int(count), "nmax": nmax},
        "violations": int(sum(s.violations for s in summaries)),
        "suites": [s.to_dict(include_checks=details) for s in summaries],
    })


def handle_simulate(scenario: dict, options: dict, reps: int | None = None, workers: int = 1) -> dict:
    spec = dict(scenario)
    if options.get("seed") is not None:
        spec["seed"] = int(options["seed"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sc = Scenario.from_dict(spec)
    config = make_config({**options, "seed": sc.seed, "emit_perm_stats": False})
    summary = power_study(sc, config, replications=reps, workers=workers)
    timings = {"elapsed_s": summary.pop("elapsed_s")}
    return envelope("simulate", {
        "scenario": sc.to_dict(),
        "config": config.echo(default_kmax(sc.n) if config.k_max is None else config.k_max),
        "warnings": [str(w.message) for w in caught],
        "summary": summary,
        "timings": timings,
    })

"""JSON report files with a fixed layout.

Floats are written with 17 significant digits so a report read back gives
the same doubles; keys keep their insertion order so equal results give
byte-identical files.  Non-finite floats (``T_n = -inf`` when no ball is
usable) have no JSON spelling and are written as ``null``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .permutation import TestReport

SCHEMA_VERSION = "1.0"
VOLATILE_KEYS = ("timings",)


def _encode(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return "%.17g" % x if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    if hasattr(obj, "to_dict"):
        return _encode(obj.to_dict(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def report_dict(report: TestReport, kind: str = "test") -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "config": report.config,
        "sample": report.sample,
        "t_n": report.t_n,
        "kappa_alpha": report.kappa_alpha,
        "p_value": report.p_value,
        "reject": bool(report.reject),
        "regions": [r.to_dict() for r in report.regions],
    }
    if report.perm_stats is not None:
        out["perm_stats"] = np.asarray(report.perm_stats)
    out.update(report.extra)
    out["timings"] = report.timings
    return out


def envelope(kind: str, payload: dict) -> dict:
    """Wrap a non-test result (verify, simulate) with the schema header."""
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **payload}


def write_report(obj: dict, path) -> None:
    Path(path).write_text(dumps(obj))


def strip_volatile(obj: dict) -> dict:
    """Copy without wall-clock fields, for reproducibility comparisons."""
    return {k: v for k, v in obj.items() if k not in VOLATILE_KEYS}


def check_report(obj: dict) -> None:
    """Raise if a test report violates: regions nonempty iff reject iff p <= alpha."""
    regions = bool(obj["regions"])
    reject = bool(obj["reject"])
    by_p = obj["p_value"] <= obj["config"]["alpha"]
    if not regions == reject == by_p:
        raise ValueError(f"inconsistent report: regions={regions}, reject={reject}, p<=alpha={by_p}")

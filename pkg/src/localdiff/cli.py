"""Command-line interface.

Exit codes: 0 on success whatever the test decision, 2 for usage errors,
3 for data errors and 1 for anything else.  With ``--server URL`` the
analysis runs on a running ``localdiff serve`` instance and the returned
report is written unchanged.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import handlers
from .core import DataError, DegenerateError, PooledSample, validate_sample
from .report import dumps
from .simgen import ScenarioError

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- ingestion ------------------------------------------------------------------------


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_table(path, columns: tuple = ()) -> tuple[np.ndarray, dict]:
    """Numeric CSV with an optional header.

    Returns the coordinate matrix and a dict mapping each name in ``columns``
    to its (float) column; those columns are located by header name and
    removed from the coordinates.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(text.splitlines())) if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = None
    if not all(_is_number(c) for c in rows[0][1]):
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header but no data rows")
    picked = {}
    for name in columns:
        if header is None:
            raise DataError(f"{path}: column {name!r} requested but the file has no header")
        if name not in header:
            raise DataError(f"{path}: no column named {name!r} in header {header}")
        picked[name] = header.index(name)
    width = len(header) if header is not None else len(rows[0][1])
    values = np.empty((len(rows), width))
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: line {lineno} has {len(row)} columns, expected {width}")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {lineno}, column {c + 1}: cannot parse {cell.strip()!r} as a number") from None
    keep = [c for c in range(width) if c not in picked.values()]
    if not keep:
        raise DataError(f"{path}: no coordinate columns")
    return values[:, keep], {name: values[:, c] for name, c in picked.items()}


def _integer_column(col: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(col)) or np.any(col != np.round(col)):
        raise DataError(f"column {name!r} must hold integers")
    return col.astype(np.int64)


def ingest(first=None, second=None, data=None, group_col: str = "g") -> PooledSample:
    """Pooled sample from two files, or from one file with a group column."""
    if data is not None:
        if first is not None or second is not None:
            raise UsageError("use either --first/--second or --data, not both")
        points, extra = read_table(data, (group_col,))
        flags = _integer_column(extra[group_col], group_col)
        if not np.all(np.isin(flags, (1, 2))):
            raise DataError(f"group column {group_col!r} must contain only 1 and 2")
        return validate_sample(points, flags)
    if first is None or second is None:
        raise UsageError("need --first and --second, or --data")
    a, _ = read_table(first)
    b, _ = read_table(second)
    return handlers.two_sample(a, b)


# -- argument parsing ---------------------------------------------------------------------


def _add_input(p):
    p.add_argument("--first", help="CSV with the first sample")
    p.add_argument("--second", help="CSV with the second sample")
    p.add_argument("--data", help="single CSV with a group column")
    p.add_argument("--group-col", default="g", help="name of the group column (values 1 and 2)")


def _add_test_options(p, seed_required=True):
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--kernel", choices=["rect", "recovery", "truncated-recovery"], default="rect")
    p.add_argument("--beta", type=float, help="smoothness of the recovery kernel (0 < beta <= 1)")
    p.add_argument("--K", type=float, help="truncation of the truncated-recovery kernel")
    p.add_argument("--kmax", type=int, help="largest neighbor count (default ceil(n/2))")
    p.add_argument("--perms", type=int, default=999, help="number of random relabelings")
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--one-sided", action="store_true", help="look only for excess of the first sample")
    p.add_argument("--emit-perm-stats", action="store_true")


def _add_common(p):
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--server", help="URL of a running service; run remotely instead of in-process")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="localdiff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("test", "multivariate two-sample test"), ("test1d", "rank-window test on the line")):
        p = sub.add_parser(name, help=helptext)
        _add_input(p)
        _add_test_options(p)
        _add_common(p)

    p = sub.add_parser("classify", help="local test of P(Y=1 | X) against a known rate")
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", default="y")
    p.add_argument("--lam", type=float, required=True, help="rate of Y=1 under the null")
    _add_test_options(p)
    _add_common(p)

    p = sub.add_parser("verify", help="exact checks of the finite-sample inequalities")
    p.add_argument("--suite", choices=["coupling", "decoupling", "bernstein", "all"], default="all")
    p.add_argument("--nmax", type=int, help="largest n in the random sweeps (at most 20)")
    p.add_argument("--count", type=int, default=100, help="random instances per suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--details", action="store_true", help="include every grid point in the report")
    _add_common(p)

    p = sub.add_parser("simulate", help="level or power study on a synthetic scenario")
    p.add_argument("--scenario", required=True, help="JSON scenario file")
    p.add_argument("--reps", type=int)
    p.add_argument("--workers", type=int, default=1, help="replications run in parallel processes")
    _add_test_options(p)
    _add_common(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _options(args) -> dict:
    return {
        "seed": args.seed, "alpha": args.alpha, "kernel": args.kernel, "beta": args.beta, "K": args.K,
        "kmax": args.kmax, "perms": args.perms, "threads": args.threads, "one_sided": args.one_sided,
        "emit_perm_stats": args.emit_perm_stats,
    }


def _load_scenario(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def _request(args) -> tuple[str, dict]:
    """Endpoint and JSON body for the thin-client mode."""
    if args.command in ("test", "test1d"):
        sample = ingest(args.first, args.second, args.data, args.group_col)
        g1 = sample.group == 1
        return f"/v1/{args.command}", {"first": sample.points[g1].tolist(), "second": sample.points[~g1].tolist(),
                                      "options": _options(args)}
    if args.command == "classify":
        points, extra = read_table(args.data, (args.label_col,))
        return "/v1/classify", {"points": points.tolist(), "y": _integer_column(extra[args.label_col], args.label_col).tolist(),
                                "lam": args.lam, "options": _options(args)}
    if args.command == "verify":
        return "/v1/verify", {"suite": args.suite, "seed": args.seed, "count": args.count, "nmax": args.nmax,
                              "details": args.details}
    return "/v1/simulate", {"scenario": _load_scenario(args.scenario), "options": _options(args), "reps": args.reps}


def _remote(args) -> str:
    import httpx

    endpoint, body = _request(args)
    try:
        resp = httpx.post(args.server.rstrip("/") + endpoint, json=body, timeout=None)
    except httpx.HTTPError as exc:
        raise ConnectionError(f"cannot reach {args.server}: {exc}") from exc
    if resp.status_code == 400:
        raise DataError(resp.json().get("detail", resp.text))
    if resp.status_code == 422:
        raise UsageError(resp.text)
    resp.raise_for_status()
    return resp.text


def _local(args) -> str:
    if args.command in ("test", "test1d"):
        sample = ingest(args.first, args.second, args.data, args.group_col)
        fn = handlers.handle_test if args.command == "test" else handlers.handle_test1d
        return dumps(fn(sample, _options(args)))
    if args.command == "classify":
        points, extra = read_table(args.data, (args.label_col,))
        y = _integer_column(extra[args.label_col], args.label_col)
        return dumps(handlers.handle_classify(points, y, args.lam, _options(args)))
    if args.command == "verify":
        return dumps(handlers.handle_verify(args.suite, args.seed, args.count, args.nmax, args.details))
    return dumps(handlers.handle_simulate(_load_scenario(args.scenario), _options(args), args.reps, args.workers))


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.command == "serve":
        import uvicorn

        from .service.app import app
        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            text = _remote(args) if args.server else _local(args)
    except UsageError as exc:
        print(f"localdiff: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DegenerateError, ScenarioError) as exc:
        print(f"localdiff: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"localdiff: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"localdiff: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    return run_cli(argv)


if __name__ == "__main__":
    sys.exit(main())

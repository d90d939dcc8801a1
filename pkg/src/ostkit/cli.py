"""Command-line surface: single tests on data files, Monte-Carlo
simulation from config files, and threshold evaluation.

Single-test reports are JSON; simulation tables are CSV (one row per
method and sample size) with the effective configuration echoed as a
leading ``#`` comment line for provenance. Exit codes: 0 clean run,
2 input/configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Any

from .exceptions import DataError, NumericalError, OstkitError
from .experiments import (
    DatasetSpec,
    KernelMenuSpec,
    load_csv_sample,
    parse_method,
    run_monte_carlo,
)
from .kernels import compute_base_statistics
from .numerics import RngStream
from .seltest import (
    COND_THRESHOLD,
    NULL_TOL,
    TestOutcome,
    base_test,
    naive_test,
    ost_beta_pos_test,
    ost_test,
    ost_threshold,
    split_test,
    wald_test,
)

__all__ = ["main"]

_ENV_SEED = "OSTKIT_SEED"


def _default_seed() -> int:
    raw = os.environ.get(_ENV_SEED)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise DataError(f"{_ENV_SEED} must be an integer, got {raw!r}")


def _json_safe(value: Any) -> Any:
    """Make a value JSON-serializable; non-finite floats become strings."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    return value


def _outcome_report(outcome: TestOutcome, n: int, d: int) -> dict:
    return _json_safe(
        {
            "method": outcome.method,
            "n": n,
            "d": d,
            "statistic": outcome.statistic,
            "threshold": outcome.threshold,
            "p_value": outcome.p_value,
            "reject": outcome.reject,
            "l": outcome.l,
            "active_set": list(outcome.active_set),
            "v_minus": outcome.v_minus,
            "warnings": list(outcome.warnings),
        }
    )


def _write_output(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------------------
# test


def _cmd_test(args: argparse.Namespace) -> int:
    x = load_csv_sample(args.x_file)
    y = load_csv_sample(args.y_file)
    if x.shape[1] != y.shape[1]:
        raise DataError(
            f"samples disagree in dimension: {x.shape[1]} vs {y.shape[1]}"
        )
    menu = KernelMenuSpec.parse(args.kernels)
    kernels = menu.build(x, y)
    family, frac, constraint = parse_method(args.method)
    if family == "split":
        if frac is None:
            frac = args.train_fraction
        if args.method == "split":
            constraint = args.constraint
        outcome = split_test(
            x, y, kernels, frac, args.alpha, constraint,
            RngStream(args.seed, 0),
        )
        n = compute_base_statistics(x, y, kernels).n
    else:
        stats = compute_base_statistics(x, y, kernels)
        n = stats.n
        if family == "ost":
            outcome = ost_test(
                stats, args.alpha, args.cond_threshold, NULL_TOL, args.ridge
            )
        elif family == "naive":
            outcome = naive_test(
                stats, args.alpha, args.cond_threshold, NULL_TOL, args.ridge
            )
        elif family == "wald":
            outcome = wald_test(stats, args.alpha)
        elif family == "base":
            outcome = base_test(stats, args.alpha)
        else:
            outcome = ost_beta_pos_test(stats, args.alpha)
    report = _outcome_report(outcome, n, len(kernels))
    _write_output(json.dumps(report, indent=2), args.out)
    return 0


# ---------------------------------------------------------------------------
# simulate

_CONFIG_KEYS = {
    "dataset", "menu", "methods", "n", "trials", "alpha", "seed",
    "workers", "out", "format",
}
_DATASET_KEYS = {"kind", "null_mode", "params"}


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise DataError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"config is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise DataError("config must be a JSON object")
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise DataError(f"unknown config keys: {sorted(unknown)}")
    if "dataset" in cfg:
        if not isinstance(cfg["dataset"], dict):
            raise DataError("config key 'dataset' must be an object")
        bad = set(cfg["dataset"]) - _DATASET_KEYS
        if bad:
            raise DataError(f"unknown dataset keys: {sorted(bad)}")
    return cfg


def _effective_simulate_config(args: argparse.Namespace) -> dict:
    cfg = _load_config(args.config) if args.config else {}
    merged = {
        "dataset": cfg.get("dataset"),
        "menu": args.menu if args.menu is not None else cfg.get("menu"),
        "methods": args.method if args.method else cfg.get("methods"),
        "n": args.n if args.n else cfg.get("n"),
        "trials": args.trials if args.trials is not None else cfg.get("trials"),
        "alpha": args.alpha if args.alpha is not None else cfg.get("alpha", 0.05),
        "seed": (
            args.seed if args.seed is not None
            else cfg.get("seed", _default_seed())
        ),
        "workers": (
            args.workers if args.workers is not None else cfg.get("workers", 1)
        ),
        "out": args.out if args.out is not None else cfg.get("out"),
        "format": (
            args.format if args.format is not None else cfg.get("format", "csv")
        ),
    }
    for key in ("dataset", "menu", "methods", "n", "trials"):
        if merged[key] is None:
            raise DataError(f"simulate needs {key!r} (flag or config file)")
    if not isinstance(merged["trials"], int) or merged["trials"] < 1:
        raise DataError(f"trials must be a positive integer, got {merged['trials']}")
    if isinstance(merged["n"], int):
        merged["n"] = [merged["n"]]
    if not (isinstance(merged["n"], list) and merged["n"]
            and all(isinstance(v, int) and v >= 2 for v in merged["n"])):
        raise DataError("n must be an integer >= 2 or a list of them")
    if isinstance(merged["methods"], str):
        merged["methods"] = [merged["methods"]]
    if merged["format"] not in ("csv", "json"):
        raise DataError(f"format must be csv or json, got {merged['format']!r}")
    return merged


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _effective_simulate_config(args)
    ds = cfg["dataset"]
    dataset = DatasetSpec(
        kind=ds.get("kind"),
        null_mode=bool(ds.get("null_mode", False)),
        params=ds.get("params", {}),
    )
    menu = KernelMenuSpec.parse(cfg["menu"])
    rows = []
    for n in cfg["n"]:
        reports = run_monte_carlo(
            dataset, menu, list(cfg["methods"]), n, cfg["trials"],
            cfg["alpha"], cfg["seed"], cfg["workers"],
        )
        for r in reports:
            rows.append(
                {
                    "method": r.method,
                    "n": r.n,
                    "trials": r.trials,
                    "rejection_rate": r.rejection_rate,
                    "std_error": r.std_error,
                    "failures": r.failures,
                    "seed": r.seed,
                }
            )

    echo = {k: v for k, v in cfg.items() if k not in ("out",)}
    if cfg["format"] == "json":
        text = json.dumps(
            {"config": _json_safe(echo), "results": _json_safe(rows)}, indent=2
        )
    else:
        buf = io.StringIO()
        buf.write(f"# config: {json.dumps(_json_safe(echo), sort_keys=True)}\n")
        writer = csv.DictWriter(
            buf,
            fieldnames=[
                "method", "n", "trials", "rejection_rate", "std_error",
                "failures", "seed",
            ],
            lineterminator="\n",
        )
        writer.writeheader()
        for row in rows:
            row = dict(row)
            row["rejection_rate"] = repr(row["rejection_rate"])
            row["std_error"] = repr(row["std_error"])
            writer.writerow(row)
        text = buf.getvalue()
    _write_output(text, cfg["out"])
    return 0


# ---------------------------------------------------------------------------
# threshold


def _cmd_threshold(args: argparse.Namespace) -> int:
    v = args.v_minus
    if isinstance(v, str):
        if v.strip().lower() in ("-inf", "-infinity"):
            v = -math.inf
        else:
            try:
                v = float(v)
            except ValueError:
                raise DataError(f"cannot parse --v-minus value {v!r}")
    t = ost_threshold(args.alpha, args.l, v)
    print(f"{t:.12g}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ostkit",
        description=(
            "Kernel two-sample tests with selective calibration: learn the "
            "kernel combination and test on the same data."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run one two-sample test on CSV files")
    t.add_argument("x_file", help="CSV file with the first sample")
    t.add_argument("y_file", help="CSV file with the second sample")
    t.add_argument("--kernels", default="d2",
                   help="menu preset (d1,d2,d6,poly<k>) or explicit list "
                        "like gauss:1.5,linear,poly:3")
    t.add_argument("--method", default="ost",
                   help="ost | wald | base | naive | ost_beta_pos | split "
                        "| split<f> | split_pos<f>")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--train-fraction", type=float, default=0.5,
                   help="training fraction for --method split")
    t.add_argument("--constraint", default="sigma_beta_pos",
                   choices=["sigma_beta_pos", "beta_pos"],
                   help="learning constraint for --method split")
    t.add_argument("--cond-threshold", type=float, default=COND_THRESHOLD,
                   help="condition number beyond which the covariance is "
                        "treated as singular")
    t.add_argument("--ridge", type=float, default=0.0,
                   help="optional ridge added to the covariance "
                        "(conservative; off by default)")
    t.add_argument("--seed", type=int, default=None,
                   help=f"split-shuffle seed (default ${_ENV_SEED} or 0)")
    t.add_argument("--out", default=None, help="write the JSON report here")
    t.set_defaults(func=_cmd_test)

    s = sub.add_parser("simulate",
                       help="estimate rejection rates over seeded trials")
    s.add_argument("--config", default=None, help="JSON config file")
    s.add_argument("--menu", default=None, help="kernel menu (overrides config)")
    s.add_argument("--method", action="append", default=None,
                   help="method label; repeatable (overrides config)")
    s.add_argument("--n", type=int, action="append", default=None,
                   help="sample size (pairs); repeatable (overrides config)")
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--format", default=None, choices=["csv", "json"])
    s.set_defaults(func=_cmd_simulate)

    th = sub.add_parser("threshold", help="print the selective threshold")
    th.add_argument("--alpha", type=float, required=True)
    th.add_argument("--l", type=int, required=True,
                    help="number of active coordinates")
    th.add_argument("--v-minus", default="-inf",
                    help="lower truncation point for l = 1 (default -inf)")
    th.set_defaults(func=_cmd_threshold)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", None) is None and args.command == "test":
            args.seed = _default_seed()
        return args.func(args)
    except DataError as exc:
        print(f"ostkit: input error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"ostkit: numerical error: {exc}", file=sys.stderr)
        return 3
    except OstkitError as exc:
        print(f"ostkit: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""``rsreg`` command line: Monte-Carlo sweeps, fits on CSV data, rate fits.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from typing import Optional

import numpy as np

from .experiment import (ConfigError, load_pipeline_config, load_plan, median_points, rate_fit,
                         read_results, run_experiment)
from .model import DataError, Dataset, FitResult, StageError
from .pipeline import PipelineConfig, adaptive_estimate

log = logging.getLogger("rsreg")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


def read_dataset_csv(path: str) -> Dataset:
    """Load a CSV with a header, a ``y`` column and feature columns.

    Rows and columns in error messages are 1-based; row 1 is the first line
    after the header. An odd trailing row is dropped with a warning so that
    the rows can be paired.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "y" not in header:
        raise DataError(f"{path}: no 'y' column in header {header}")
    if len(header) < 2:
        raise DataError(f"{path}: no feature columns")
    yi = header.index("y")
    body = rows[1:]
    vals = np.empty((len(body), len(header)))
    for i, r in enumerate(body, 1):
        if len(r) != len(header):
            raise DataError(f"row {i}: expected {len(header)} columns, found {len(r)}")
        for j, cell in enumerate(r, 1):
            try:
                vals[i - 1, j - 1] = float(cell)
            except ValueError:
                raise DataError(f"row {i}, column {j}: cannot parse {cell.strip()!r} as a number") from None
    if vals.shape[0] % 2:
        log.warning("dropped 1 row: pair differencing needs an even row count")
        vals = vals[:-1]
    return Dataset(vals[:, yi], np.delete(vals, yi, axis=1))


def write_dataset_csv(data: Dataset, path: str) -> None:
    """Exact round-trip writer: header ``y,x1..xd``, floats in repr form."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y"] + [f"x{j + 1}" for j in range(data.d)])
        for yi, xi in zip(data.y, data.X):
            w.writerow([repr(float(yi))] + [repr(float(v)) for v in xi])


def fit_command(csv_path: str, config_path: Optional[str] = None, intercept: Optional[str] = None,
                known_o: Optional[int] = None) -> FitResult:
    cfg = load_pipeline_config(config_path) if config_path else PipelineConfig()
    changes = {}
    if intercept is not None:
        changes["intercept"] = {"sqrt": "sqrt_slope", "mom": "mom"}.get(intercept, intercept)
    if known_o is not None:
        changes["known_o"] = known_o
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    return adaptive_estimate(read_dataset_csv(csv_path), cfg)


def format_fit(fit: FitResult) -> str:
    lines = [
        f"mu_hat = {fit.mu_hat!r}",
        f"varsigma_final = {fit.varsigma_final!r}",
        f"iterations_used = {fit.iterations_used}",
        f"nonzero = {int(np.count_nonzero(fit.beta_hat))}",
        "varsigma_trace = " + ",".join(repr(float(v)) for v in fit.varsigma_trace),
        "beta_hat = " + ",".join(repr(float(v)) for v in fit.beta_hat),
    ]
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rsreg", description="Robust sparse regression experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="Monte-Carlo sweep from a plan file")
    run.add_argument("plan")
    run.add_argument("--out", help="CSV path (overrides output_path in the plan)")
    fit = sub.add_parser("fit", help="fit the adaptive estimator on a CSV")
    fit.add_argument("data")
    fit.add_argument("--config")
    fit.add_argument("--intercept", choices=("sqrt", "mom"))
    fit.add_argument("--known-o", type=int, dest="known_o")
    rf = sub.add_parser("ratefit", help="fit the error exponent from a results CSV")
    rf.add_argument("results")
    rf.add_argument("--x", default="n", help="sweep variable or numeric column")
    rf.add_argument("--y", default="l2_error")
    return p


def _ratefit(args) -> str:
    rows, plan = read_results(args.results)
    if not rows:
        raise DataError(f"{args.results}: no result rows")
    x = args.x
    if x not in rows[0]:
        if plan is not None and plan.get("sweep_variable") == x:
            x = "sweep_value"
        else:
            raise UsageError(f"unknown column {args.x!r}")
    if args.y not in rows[0]:
        raise UsageError(f"unknown column {args.y!r}")
    try:
        rep = rate_fit(median_points(rows, x, args.y))
    except ValueError as e:
        raise DataError(str(e)) from e
    out = [f"slope = {rep.slope:.6g}", f"intercept = {rep.intercept:.6g}",
           f"r_squared = {rep.r_squared:.6g}"]
    out += [f"median {args.y} at {args.x}={xv:g}: {ev:.6g}" for xv, ev in rep.per_point_medians]
    return "\n".join(out) + "\n"


def _stage_exit(e: StageError) -> int:
    return EXIT_DATA if isinstance(e.cause, (DataError, ConfigError)) else EXIT_SOLVER


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="rsreg: %(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.command == "run":
            plan = load_plan(args.plan)
            if args.out:
                plan = dataclasses.replace(plan, output_path=args.out)
            rows = run_experiment(plan)
            failed = sum(bool(r["error"]) for r in rows)
            print(f"wrote {len(rows)} rows to {plan.output_path} ({failed} failed)")
        elif args.command == "fit":
            sys.stdout.write(format_fit(fit_command(args.data, args.config, args.intercept,
                                                    args.known_o)))
        else:
            sys.stdout.write(_ratefit(args))
        return EXIT_OK
    except UsageError as e:
        print(f"rsreg: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"rsreg: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as e:
        print(f"rsreg: {e}", file=sys.stderr)
        return _stage_exit(e)
    except (DataError, OSError) as e:
        print(f"rsreg: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:
        print(f"rsreg: solver failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

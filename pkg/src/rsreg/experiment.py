"""Monte-Carlo harness: plans, sweeps, result CSVs, rate fitting and config files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import time
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .huber import CompositeObjective, HuberSolverConfig, accelerated_prox_grad, spectral_norm_sq
from .model import FitResult, TheoryParams, error_metrics
from .pipeline import PipelineConfig, adaptive_estimate, normalize_pairs
from .slope import lambda_weights, prox_sorted_l1
from .synth import SynthConfig, derive_seed, make_instance

SWEEP_VARIABLES = ("n", "o", "s", "sigma_star", "c_ini")
ESTIMATORS = ("adaptive", "slope_ls")
RESULT_COLUMNS = ("sweep_value", "rep", "seed", "l2_error", "sigma_norm_error", "mu_error",
                  "varsigma_final", "varsigma_star", "iterations", "wall_ms", "error")
_INT_COLUMNS = ("rep", "seed", "iterations")


class ConfigError(ValueError):
    """Malformed or unknown entry in a key-value config file."""


@dataclass(frozen=True)
class ExperimentPlan:
    """A sweep over one synthetic-design variable.

    ``n`` sweeps the number of pairs (``base.n_pairs``). ``estimator`` picks
    the adaptive pipeline or the oracle-tuned SLOPE least-squares baseline,
    whose penalty is ``baseline_scale * sigma_star * lambda``.
    """

    sweep_variable: str = "n"
    sweep_values: Tuple[float, ...] = (100,)
    replications: int = 1
    base: SynthConfig = field(default_factory=SynthConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    output_path: str = "results.csv"
    estimator: str = "adaptive"
    baseline_scale: float = 0.75

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.sweep_variable!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        vals = tuple(self.sweep_values)
        if not vals:
            raise ValueError("sweep_values must be nonempty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep_values must be strictly increasing")
        object.__setattr__(self, "sweep_values", vals)
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if not self.baseline_scale > 0:
            raise ValueError("baseline_scale must be positive")


def apply_sweep(plan: ExperimentPlan, value, seed: int):
    """Synthetic and pipeline configs for one (sweep value, replication)."""
    base, pipe = plan.base, plan.pipeline
    var = plan.sweep_variable
    if var == "n":
        base = dataclasses.replace(base, n_pairs=int(value))
    elif var == "o":
        base = dataclasses.replace(base, outliers=dataclasses.replace(base.outliers, o=int(value)))
    elif var == "s":
        base = dataclasses.replace(base, s=int(value))
    elif var == "sigma_star":
        base = dataclasses.replace(base, noise=dataclasses.replace(base.noise, sigma_star=float(value)))
    else:
        pipe = dataclasses.replace(pipe, c_ini=float(value))
    return dataclasses.replace(base, seed=seed), pipe


def slope_least_squares(data, scale: float, cfg: Optional[HuberSolverConfig] = None) -> FitResult:
    """Baseline: SLOPE-penalized least squares with weights ``scale * lambda``.

    Coefficients come from the pair-normalized rows, the intercept is the
    mean residual over all rows.
    """
    cfg = cfg or HuberSolverConfig()
    norm = normalize_pairs(data)
    n, d = norm.m, norm.d
    pen = scale * lambda_weights(d, n).w
    L = spectral_norm_sq(norm.X) / n * (1.0 + 1e-7)

    def smooth(b):
        r = norm.y - norm.X @ b
        return 0.5 * float(r @ r) / n

    def grad(b):
        return -(norm.X.T @ (norm.y - norm.X @ b)) / n

    def prox(v, step):
        return prox_sorted_l1(v, pen, step)

    def residual(b, Lc):
        return float(np.linalg.norm(b - prox(b - grad(b) / Lc, 1.0 / Lc)))

    obj = CompositeObjective(smooth, lambda b: float(pen @ np.sort(np.abs(b))[::-1]))
    if L == 0.0:
        beta, it, reason = np.zeros(d), 0, "optimal"
    else:
        beta, _, it, reason, _, _, _, _ = accelerated_prox_grad(obj, grad, prox, np.zeros(d), L,
                                                                 cfg, residual)
    mu = float(np.mean(data.y - data.X @ beta))
    return FitResult(beta, mu, (scale,), it, {"reason": reason})


def run_replication(plan: ExperimentPlan, value, rep: int) -> dict:
    seed = derive_seed(plan.base.seed, rep)
    row = {"sweep_value": value, "rep": rep, "seed": seed}
    nan = math.nan
    row.update(l2_error=nan, sigma_norm_error=nan, mu_error=nan, varsigma_final=nan,
               varsigma_star=nan, iterations=0, wall_ms=0.0, error="")
    t0 = time.perf_counter()
    try:
        synth, pipe = apply_sweep(plan, value, seed)
        inst = make_instance(synth)
        row["varsigma_star"] = inst.truth.varsigma_star
        if plan.estimator == "adaptive":
            fit = adaptive_estimate(inst.data, pipe)
        else:
            fit = slope_least_squares(inst.data, plan.baseline_scale * synth.noise.sigma_star,
                                      pipe.huber)
        row.update(error_metrics(fit, inst.truth, inst.sigma))
        row["varsigma_final"] = fit.varsigma_final
        row["iterations"] = fit.iterations_used
    except Exception as e:  # recorded per row; the sweep carries on
        row["error"] = f"{type(e).__name__}: {e}".replace("\n", " ")
    row["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return row


def _worker_count(n_tasks: int) -> int:
    env = os.environ.get("RSREG_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_tasks))


def plan_to_json(plan: ExperimentPlan) -> str:
    return json.dumps(dataclasses.asdict(plan), sort_keys=True, default=str)


def run_experiment(plan: ExperimentPlan, write: bool = True) -> list:
    """Run every (sweep value, replication) cell; rows come back in that order.

    With ``write`` the rows go to ``plan.output_path`` followed by a
    ``# plan:`` comment holding the full plan as JSON.
    """
    tasks = [(v, r) for v in plan.sweep_values for r in range(plan.replications)]
    workers = _worker_count(len(tasks))
    if workers == 1:
        rows = [run_replication(plan, v, r) for v, r in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(run_replication, [plan] * len(tasks), *zip(*tasks)))
    if write:
        with open(plan.output_path, "w", newline="") as fh:
            fh.write(format_results(rows, plan))
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_results(rows, plan: Optional[ExperimentPlan] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    if plan is not None:
        buf.write(f"# plan: {plan_to_json(plan)}\n")
    return buf.getvalue()


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_results(text: str):
    """Inverse of :func:`format_results`; returns (rows, plan dict or None)."""
    plan = None
    lines = []
    for line in text.splitlines():
        if line.startswith("# plan: "):
            plan = json.loads(line[len("# plan: "):])
        elif line.strip() and not line.startswith("#"):
            lines.append(line)
    reader = csv.DictReader(lines)
    rows = []
    for raw in reader:
        row = {}
        for k, v in raw.items():
            if k == "error":
                row[k] = v
            elif k == "sweep_value":
                row[k] = _number(v)
            elif k in _INT_COLUMNS:
                row[k] = int(v)
            else:
                row[k] = float(v)
        rows.append(row)
    return rows, plan


def read_results(path: str):
    with open(path) as fh:
        return parse_results(fh.read())


@dataclass(frozen=True)
class RateFitReport:
    slope: float
    intercept: float
    r_squared: float
    per_point_medians: Tuple[Tuple[float, float], ...]


def rate_fit(points: Sequence[Tuple[float, float]]) -> RateFitReport:
    """Least-squares line through (log x, log error); the slope is the exponent."""
    pts = [(float(x), float(e)) for x, e in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    if any(not (x > 0 and e > 0) for x, e in pts):
        raise ValueError("x and error values must be positive")
    lx = np.log([p[0] for p in pts])
    le = np.log([p[1] for p in pts])
    if np.ptp(lx) == 0:
        raise ValueError("x values must not all coincide")
    slope, intercept = np.polyfit(lx, le, 1)
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    ss_res = float(np.sum((le - (slope * lx + intercept)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RateFitReport(float(slope), float(intercept), r2, tuple(pts))


def median_points(rows, x: str = "sweep_value", y: str = "l2_error"):
    """Per-x medians over rows without an error and with a finite y."""
    groups = {}
    for row in rows:
        if row.get("error") or not math.isfinite(row[y]):
            continue
        groups.setdefault(row[x], []).append(row[y])
    return [(k, float(np.median(v))) for k, v in sorted(groups.items())]


OUTLIER_REGIMES = ("subgaussian", "heavy", "subgaussian_known", "heavy_known", "mom")


def predicted_rate(theory: TheoryParams, n: int, d: int, regime: str = "subgaussian",
                   moment_order: Optional[float] = None, delta: Optional[float] = None) -> float:
    """Bracketed error rate without its leading constant.

    dimension term + outlier term + confidence term, with the outlier term
    chosen by ``regime``: (o/n) log(n/o) sub-Gaussian, (o/n)^(1-2/M) heavy,
    (o/n) sqrt(log(n/o)) and (o/n)^(1-1/M) with o known, sqrt(o/n) for the
    median-of-means intercept. o = 0 contributes nothing. ``delta`` overrides
    ``theory.delta`` without its 1/9 cap, since this is only a diagnostic.
    """
    if regime not in OUTLIER_REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    o = theory.o
    if o >= n:
        raise ValueError(f"need o < n, got o={o}, n={n}")
    dim = theory.rho / theory.kappa * math.sqrt(math.log(math.e * d / theory.s) / n)
    delta = theory.delta if delta is None else delta
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    conf = math.sqrt(math.log(1.0 / delta) / n)
    if o == 0:
        return dim + conf
    f = o / n
    if regime in ("heavy", "heavy_known"):
        if moment_order is None or not moment_order > 2:
            raise ValueError("heavy regimes need moment_order > 2")
        out = f ** (1 - (2 if regime == "heavy" else 1) / moment_order)
    elif regime == "subgaussian":
        out = f * math.log(n / o)
    elif regime == "subgaussian_known":
        out = f * math.sqrt(math.log(n / o))
    else:
        out = math.sqrt(f)
    return dim + out + conf


# ---- flat key = value config files ----

def parse_kv(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _coerce(hint, text: str, key: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union and type(None) in args:
        if text.lower() in ("none", "null", ""):
            return None
        hint = next(a for a in args if a is not type(None))
        origin, args = typing.get_origin(hint), typing.get_args(hint)
    try:
        if origin in (tuple, list):
            items = [t.strip() for t in text.split(",") if t.strip()]
            inner = args[0] if args else float
            return tuple(_number(t) if inner is float else inner(t) for t in items)
        if hint is bool:
            low = text.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(text)
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        if hint is str:
            return text
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {getattr(hint, '__name__', hint)}") from None
    raise ConfigError(f"{key}: unsupported field type {hint}")


def _nested_class(hint):
    if dataclasses.is_dataclass(hint):
        return hint
    if typing.get_origin(hint) is typing.Union:
        for a in typing.get_args(hint):
            if dataclasses.is_dataclass(a):
                return a
    return None


def build_config(cls, kv: dict, prefix: str = ""):
    """Instantiate dataclass ``cls`` from flat keys; dotted keys reach nested configs."""
    hints = typing.get_type_hints(cls)
    kwargs, nested = {}, {}
    for key, value in kv.items():
        head, _, rest = key.partition(".")
        if head not in hints:
            raise ConfigError(f"unknown key {prefix + key!r}")
        sub = _nested_class(hints[head])
        if rest:
            if sub is None:
                raise ConfigError(f"{prefix + head!r} has no sub-keys")
            nested.setdefault(head, {})[rest] = value
        elif sub is not None:
            if value.lower() not in ("none", "null"):
                raise ConfigError(f"{prefix + key!r} takes sub-keys, not a value")
            kwargs[head] = None
        else:
            kwargs[head] = _coerce(hints[head], value, prefix + key)
    for head, sub_kv in nested.items():
        kwargs[head] = build_config(_nested_class(hints[head]), sub_kv, f"{prefix}{head}.")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{prefix or cls.__name__}: {e}") from e


def load_plan(path: str) -> ExperimentPlan:
    with open(path) as fh:
        return build_config(ExperimentPlan, parse_kv(fh.read()))


def load_pipeline_config(path: str) -> PipelineConfig:
    with open(path) as fh:
        return build_config(PipelineConfig, parse_kv(fh.read()))

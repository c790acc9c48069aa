"""End-to-end adaptive estimation: pair normalization, the coefficient/scale
alternation, and intercept estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .huber import HuberSolverConfig, solve_penalized_huber, spectral_norm_sq
from .intercept import InterceptSolverConfig, solve_intercept
from .model import DataError, Dataset, FitResult, StageError, TheoryParams, validate_dataset
from .mom import EPS_SCALE, default_block_count, mom_intercept, robust_absolute_moment
from .slope import SlopeWeights, iota_weights, lambda_weights


@dataclass(frozen=True)
class PipelineConfig:
    """Tuning constants of the adaptive estimator.

    ``c_ini=None`` starts the scale at 8 * mean|y'| of the normalized data, an
    upper bound on the residual scale at beta = 0. ``c_lambda=None`` selects
    the data-driven value ``c_lambda_multiplier * L * max column std``.
    ``intercept`` is "sqrt_slope" or "mom"; ``known_o`` switches the
    sqrt-SLOPE weights to their flat known-o form and is the outlier upper
    bound for "mom".
    """

    c_ini: Optional[float] = None
    c_h: float = 0.25
    c_lambda: Optional[float] = None
    c_lambda_multiplier: float = 0.4
    n_iter: int = 30
    scale_rtol: float = 1e-3
    block_count: Optional[int] = None
    intercept: str = "sqrt_slope"
    iota_regime: str = "subgaussian"
    moment_order: float = 4.0
    known_o: Optional[int] = None
    mom_delta: float = 0.05
    theory: Optional[TheoryParams] = None
    huber: HuberSolverConfig = field(default_factory=HuberSolverConfig)
    intercept_solver: InterceptSolverConfig = field(default_factory=InterceptSolverConfig)

    def __post_init__(self):
        if self.c_ini is not None and not self.c_ini > 0:
            raise ValueError("c_ini must be positive")
        if not self.c_h > 0:
            raise ValueError("c_h must be positive")
        if self.c_lambda is not None and not self.c_lambda > 0:
            raise ValueError("c_lambda must be positive")
        if not self.c_lambda_multiplier > 0:
            raise ValueError("c_lambda_multiplier must be positive")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if not self.scale_rtol >= 0:
            raise ValueError("scale_rtol must be nonnegative")
        if self.intercept not in ("sqrt_slope", "mom"):
            raise ValueError(f"unknown intercept method {self.intercept!r}")
        if self.iota_regime not in ("subgaussian", "heavy"):
            raise ValueError(f"unknown iota regime {self.iota_regime!r}")
        if self.known_o is not None and self.known_o < 0:
            raise ValueError("known_o must be nonnegative")


def normalize_pairs(data: Dataset) -> Dataset:
    """Row i becomes ((y_i - y_{n+i}) / sqrt 2, (x_i - x_{n+i}) / sqrt 2)."""
    m = data.m
    if m < 2 or m % 2:
        raise DataError(f"pair normalization needs an even number of rows >= 2, got {m}")
    n = m // 2
    r2 = math.sqrt(2.0)
    return Dataset((data.y[:n] - data.y[n:]) / r2, (data.X[:n] - data.X[n:]) / r2)


def auto_c_lambda(norm_data: Dataset, multiplier: float, L: float = 1.0) -> float:
    """multiplier * L * (largest sample standard deviation over columns)."""
    ddof = 1 if norm_data.m > 1 else 0
    rho_hat = float(np.max(np.std(norm_data.X, axis=0, ddof=ddof)))
    if not rho_hat > 0:
        raise DataError("every covariate column has zero variance")
    return multiplier * L * rho_hat


@dataclass
class CoefficientsResult:
    beta_hat: np.ndarray
    varsigma_trace: list
    diagnostics: dict


def coefficients_estimation(norm_data: Dataset, cfg: PipelineConfig,
                            lam: Optional[SlopeWeights] = None) -> CoefficientsResult:
    """Alternate penalized Huber fits with median-of-means scale updates."""
    n, d = norm_data.m, norm_data.d
    lam = lam if lam is not None else lambda_weights(d, n)
    if len(lam) != d:
        raise ValueError(f"lam has length {len(lam)}, expected {d}")
    lip = spectral_norm_sq(norm_data.X) / n
    L = cfg.theory.L if cfg.theory is not None else 1.0
    if cfg.c_lambda is not None:
        c_lambda = cfg.c_lambda
    elif lip == 0.0:
        # zero design: beta_hat = 0 whatever the penalty, so skip the estimate
        c_lambda = cfg.c_lambda_multiplier * L
    else:
        c_lambda = auto_c_lambda(norm_data, cfg.c_lambda_multiplier, L)
    if cfg.block_count is not None:
        B = min(cfg.block_count, n)
    else:
        B = default_block_count(n) if n >= 3 else n
    c_ini = cfg.c_ini
    if c_ini is None:
        c_ini = max(8.0 * float(np.mean(np.abs(norm_data.y))), EPS_SCALE)

    beta = np.zeros(d)
    trace = [float(c_ini)]
    stages = []
    for _ in range(cfg.n_iter):
        sol = solve_penalized_huber(norm_data, cfg.c_h, trace[-1], c_lambda, lam, cfg.huber,
                                    warm_start=beta, lipschitz=lip)
        beta = sol.beta
        stages.append({"objective": sol.objective, "reason": sol.reason,
                       "iterations": sol.iterations, "opt_residual": sol.opt_residual})
        trace.append(robust_absolute_moment(norm_data.y - norm_data.X @ beta, B))
        if abs(trace[-1] - trace[-2]) <= cfg.scale_rtol * trace[-1]:
            break
    diagnostics = {
        "c_lambda": c_lambda,
        "block_count": B,
        "lipschitz": lip,
        "huber_stages": stages,
        "solver_nonconverged": sum(s["reason"] == "max_iters" for s in stages),
    }
    return CoefficientsResult(beta, trace, diagnostics)


def estimate_intercept(data: Dataset, beta_hat, cfg: PipelineConfig):
    """Intercept from the original (un-normalized) rows and a fitted beta."""
    z = data.y - data.X @ beta_hat
    m = z.size
    if cfg.intercept == "mom":
        o = cfg.known_o or 0
        B = default_block_count(m, cfg.mom_delta, o) if m >= 3 else m
        return mom_intercept(z, B), {"method": "mom", "block_count": B}
    known = None if cfg.known_o is None else min(max(cfg.known_o, 1), m)
    iota = iota_weights(m, cfg.iota_regime, cfg.moment_order, known)
    sol = solve_intercept(z, iota, cfg.intercept_solver)
    return sol.mu_hat, {"method": "sqrt_slope", "objective": sol.objective,
                        "iterations": sol.iterations, "converged": sol.converged,
                        "outliers_flagged": int(np.count_nonzero(sol.theta_hat))}


def adaptive_estimate(data: Dataset, cfg: Optional[PipelineConfig] = None) -> FitResult:
    """Full estimator on 2n rows: normalize, estimate beta, then mu."""
    cfg = cfg or PipelineConfig()
    try:
        validate_dataset(data)
        norm = normalize_pairs(data)
    except Exception as e:
        raise StageError("normalizing", e) from e
    try:
        coef = coefficients_estimation(norm, cfg)
    except Exception as e:
        raise StageError("coefficients", e) from e
    try:
        mu_hat, idiag = estimate_intercept(data, coef.beta_hat, cfg)
    except Exception as e:
        raise StageError("intercept", e) from e
    diagnostics = dict(coef.diagnostics)
    diagnostics["intercept"] = idiag
    return FitResult(coef.beta_hat, mu_hat, coef.varsigma_trace,
                     len(coef.varsigma_trace) - 1, diagnostics)

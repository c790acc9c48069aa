"""Synthetic instances: Gaussian covariates, scaled noise, adversarial outliers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammaln

from .model import Dataset, GroundTruth, NoiseSpec

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, rep_index: int) -> int:
    """rep_seed = mix64(master_seed XOR rep_index * 0x9E3779B97F4A7C15)."""
    return mix64((master_seed & MASK64) ^ ((rep_index * GOLDEN64) & MASK64))


@dataclass(frozen=True)
class OutlierSpec:
    """``magnitude_mode`` is "sqrt_n_scaled" (adds sqrt(m) * value) or "absolute"."""

    o: int = 0
    placement: str = "random_uniform"
    magnitude_mode: str = "sqrt_n_scaled"
    value: float = 1.0
    sign: str = "positive"

    def __post_init__(self):
        if self.o < 0:
            raise ValueError("o must be nonnegative")
        if self.placement not in ("random_uniform", "first_o", "adversarial_leverage"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.magnitude_mode not in ("sqrt_n_scaled", "absolute"):
            raise ValueError(f"unknown magnitude mode {self.magnitude_mode!r}")
        if self.sign not in ("positive", "alternating", "random"):
            raise ValueError(f"unknown sign rule {self.sign!r}")


@dataclass(frozen=True)
class SynthConfig:
    n_pairs: int = 100
    d: int = 10
    s: int = 3
    beta_scale: float = 1.0
    mu_star: float = 0.0
    covariate_cov: str = "identity"
    cov_values: Tuple[float, ...] = ()
    rho_c: float = 0.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    outliers: OutlierSpec = field(default_factory=OutlierSpec)
    seed: int = 0

    def __post_init__(self):
        if self.n_pairs < 1 or self.d < 1 or not 0 <= self.s <= self.d:
            raise ValueError("need n_pairs >= 1, d >= 1 and 0 <= s <= d")
        if self.covariate_cov not in ("identity", "diagonal", "equicorrelated"):
            raise ValueError(f"unknown covariance shape {self.covariate_cov!r}")
        if self.covariate_cov == "equicorrelated" and not 0 <= self.rho_c < 1:
            raise ValueError("rho_c must lie in [0, 1)")
        if self.covariate_cov == "diagonal" and len(self.cov_values) != self.d:
            raise ValueError("diagonal covariance needs d values")
        if self.outliers.o > 2 * self.n_pairs:
            raise ValueError("more outliers than samples")


@dataclass(frozen=True, eq=False)
class SynthInstance:
    data: Dataset
    truth: GroundTruth
    sigma: np.ndarray


def covariance(cfg: SynthConfig) -> np.ndarray:
    if cfg.covariate_cov == "identity":
        S = np.eye(cfg.d)
    elif cfg.covariate_cov == "diagonal":
        S = np.diag(np.asarray(cfg.cov_values, dtype=np.float64))
    else:
        S = np.full((cfg.d, cfg.d), cfg.rho_c) + (1 - cfg.rho_c) * np.eye(cfg.d)
    return S


def gen_covariates(cfg: SynthConfig, rng: np.random.Generator):
    """2n i.i.d. rows from N(0, Sigma); returns (X, Sigma)."""
    S = covariance(cfg)
    evals = np.linalg.eigvalsh(S)
    if evals.min() <= 0:
        raise ValueError(f"covariance must be positive definite (min eigenvalue {evals.min():.3g})")
    Z = rng.standard_normal((2 * cfg.n_pairs, cfg.d))
    if cfg.covariate_cov == "identity":
        return Z, S
    return Z @ np.linalg.cholesky(S).T, S


def _student_abs_moment(nu: float, p: float) -> float:
    # E|T|^p for a standard t_nu variable, p < nu
    return math.exp(0.5 * p * math.log(nu) + gammaln((p + 1) / 2) + gammaln((nu - p) / 2)
                    - 0.5 * math.log(math.pi) - gammaln(nu / 2))


def noise_abs_moment(spec: NoiseSpec, p: float = 1.0) -> float:
    """Analytic E|xi|^p for the scaled family (inf when it does not exist)."""
    s = spec.sigma_star
    if spec.family == "none":
        return 0.0
    if spec.family == "gaussian":
        return s ** p * math.exp(0.5 * p * math.log(2) + gammaln((p + 1) / 2) - 0.5 * math.log(math.pi))
    a = float(spec.param)
    if p >= a:
        return math.inf
    if spec.family == "student_t":
        return (s * math.sqrt((a - 2) / a)) ** p * _student_abs_moment(a, p)
    # Lomax magnitude: E Y^p = Gamma(p+1) Gamma(a-p) / Gamma(a) for unit scale
    c = s * math.sqrt((a - 1) * (a - 2) / 2)
    return c ** p * math.exp(gammaln(p + 1) + gammaln(a - p) - gammaln(a))


def gen_noise(spec: NoiseSpec, count: int, rng: np.random.Generator):
    """Draw ``count`` noise values with standard deviation sigma_star.

    ``pareto_symmetric`` uses a random sign times a Lomax (Pareto II)
    magnitude, so it keeps mass near zero. Returns (draws, E|xi|).
    """
    s = spec.sigma_star
    if spec.family == "none":
        xi = np.zeros(count)
    elif spec.family == "gaussian":
        xi = s * rng.standard_normal(count)
    elif spec.family == "student_t":
        nu = float(spec.param)
        xi = s * math.sqrt((nu - 2) / nu) * rng.standard_t(nu, count)
    else:
        a = float(spec.param)
        c = s * math.sqrt((a - 1) * (a - 2) / 2)
        xi = c * rng.pareto(a, count) * rng.choice([-1.0, 1.0], count)
    return xi, noise_abs_moment(spec, 1.0)


def inject_outliers(y, spec: OutlierSpec, X, rng: np.random.Generator):
    """Add corruption at adversary-chosen rows; returns (y_corrupted, indices, theta)."""
    y = np.array(y, dtype=np.float64, copy=True)
    m = y.size
    if not 0 <= spec.o <= m:
        raise ValueError(f"o must lie in [0, {m}], got {spec.o}")
    theta = np.zeros(m)
    if spec.o == 0:
        return y, np.zeros(0, dtype=np.int64), theta
    if spec.placement == "first_o":
        idx = np.arange(spec.o)
    elif spec.placement == "random_uniform":
        idx = np.sort(rng.choice(m, size=spec.o, replace=False))
    else:
        norms = np.linalg.norm(np.asarray(X, dtype=np.float64), axis=1)
        idx = np.sort(np.argsort(-norms, kind="stable")[: spec.o])
    if spec.sign == "positive":
        signs = np.ones(spec.o)
    elif spec.sign == "alternating":
        signs = np.where(np.arange(spec.o) % 2 == 0, 1.0, -1.0)
    else:
        signs = rng.choice([-1.0, 1.0], spec.o)
    rm = math.sqrt(m)
    if spec.magnitude_mode == "sqrt_n_scaled":
        theta[idx] = signs * spec.value
    else:
        theta[idx] = signs * spec.value / rm
    y[idx] += rm * theta[idx]
    return y, idx.astype(np.int64), theta


def make_instance(cfg: SynthConfig) -> SynthInstance:
    """y = X beta* + mu* + xi + outliers, fully determined by ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed & MASK64)
    X, S = gen_covariates(cfg, rng)
    beta = np.zeros(cfg.d)
    beta[: cfg.s] = cfg.beta_scale * np.where(np.arange(cfg.s) % 2 == 0, 1.0, -1.0)
    xi, varsigma_star = gen_noise(cfg.noise, X.shape[0], rng)
    y_clean = X @ beta + cfg.mu_star + xi
    y, idx, theta = inject_outliers(y_clean, cfg.outliers, X, rng)
    truth = GroundTruth(beta, cfg.mu_star, idx, theta, cfg.noise, varsigma_star)
    return SynthInstance(Dataset(y, X), truth, S)

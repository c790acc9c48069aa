"""Shared value types, input validation and error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class DataError(ValueError):
    """Raised for malformed numerical input."""


class DimensionMismatch(DataError):
    pass


class NonFiniteEntry(DataError):
    pass


class StageError(RuntimeError):
    """Wraps a failure inside one stage of the estimation pipeline."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def _frozen(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Responses ``y`` (length m) and covariates ``X`` (m x d), row i is x_i."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen(self.y, 1))
        object.__setattr__(self, "X", _frozen(self.X, 2))

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Noise family scaled to standard deviation ``sigma_star``.

    ``param`` is the degrees of freedom for ``student_t`` and the tail index
    for ``pareto_symmetric``; it is ignored otherwise. ``moment_order`` is the
    order M of the highest absolute moment assumed finite (``inf`` for
    Gaussian noise); when left as None a family default is used.
    """

    family: str = "gaussian"
    sigma_star: float = 1.0
    param: Optional[float] = None
    moment_order: Optional[float] = None

    FAMILIES = ("gaussian", "student_t", "pareto_symmetric", "none")

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if (self.family == "none") != (self.sigma_star == 0):
            raise ValueError("family 'none' requires sigma_star == 0 and vice versa")
        if self.sigma_star < 0 or not math.isfinite(self.sigma_star):
            raise ValueError("sigma_star must be finite and nonnegative")
        if self.family in ("student_t", "pareto_symmetric"):
            if self.param is None or not self.param > 2:
                name = "dof" if self.family == "student_t" else "tail_index"
                raise ValueError(f"{self.family} requires {name} > 2, got {self.param}")
        M = self.M
        if not M > 2:
            raise ValueError("moment_order must exceed 2")
        if self.family in ("student_t", "pareto_symmetric") and not M < self.param:
            raise ValueError("moment_order must be below the tail parameter")

    @property
    def M(self) -> float:
        if self.moment_order is not None:
            return float(self.moment_order)
        if self.family in ("student_t", "pareto_symmetric"):
            return (2.0 + float(self.param)) / 2.0
        return math.inf


@dataclass(frozen=True, eq=False)
class GroundTruth:
    beta_star: np.ndarray
    mu_star: float
    outlier_indices: np.ndarray
    theta: np.ndarray
    noise: NoiseSpec
    varsigma_star: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta_star", _frozen(self.beta_star, 1))
        object.__setattr__(self, "theta", _frozen(self.theta, 1))
        idx = np.array(self.outlier_indices, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "outlier_indices", idx)
        if np.count_nonzero(self.theta) > idx.size:
            raise ValueError("theta has nonzeros outside the outlier set")

    @property
    def s(self) -> int:
        return int(np.count_nonzero(self.beta_star))

    @property
    def o(self) -> int:
        return int(self.outlier_indices.size)


@dataclass(frozen=True)
class TheoryParams:
    """Distributional constants used only for rate diagnostics."""

    rho: float = 1.0
    kappa: float = 1.0
    L: float = 1.0
    s: int = 1
    o: int = 0
    delta: float = 0.05

    def __post_init__(self):
        if min(self.rho, self.kappa) <= 0 or self.L < 1:
            raise ValueError("rho, kappa must be positive and L >= 1")
        if self.s < 1 or self.o < 0:
            raise ValueError("s must be positive and o nonnegative")
        if not 0 < self.delta <= 1 / 9:
            raise ValueError("delta must lie in (0, 1/9]")


@dataclass(frozen=True, eq=False)
class FitResult:
    beta_hat: np.ndarray
    mu_hat: float
    varsigma_trace: tuple
    iterations_used: int
    solver_diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "beta_hat", _frozen(self.beta_hat, 1))
        object.__setattr__(self, "varsigma_trace", tuple(float(v) for v in self.varsigma_trace))
        if any(not v > 0 for v in self.varsigma_trace):
            raise ValueError("scale trace entries must be strictly positive")

    @property
    def varsigma_final(self) -> float:
        return self.varsigma_trace[-1]


def validate_dataset(data: Dataset) -> Dataset:
    """Return ``data`` unchanged if it is well formed, else raise a DataError."""
    y, X = data.y, data.X
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionMismatch(f"X must be at least 1x1, got shape {X.shape}")
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"y has length {y.shape[0]} but X has {X.shape[0]} rows")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise NonFiniteEntry(f"non-finite entry y[{bad[0]}]")
    bad = np.argwhere(~np.isfinite(X))
    if bad.size:
        i, j = bad[0]
        raise NonFiniteEntry(f"non-finite entry X[{i}, {j}]")
    return data


def error_metrics(result: FitResult, truth: GroundTruth, sigma_matrix=None) -> dict:
    beta_hat = np.asarray(result.beta_hat, dtype=np.float64)
    beta_star = np.asarray(truth.beta_star, dtype=np.float64)
    if beta_hat.shape != beta_star.shape:
        raise DimensionMismatch(f"beta_hat {beta_hat.shape} vs beta_star {beta_star.shape}")
    diff = beta_hat - beta_star
    l2 = float(np.linalg.norm(diff))
    if sigma_matrix is None:
        sig = l2
    else:
        S = np.asarray(sigma_matrix, dtype=np.float64)
        if S.shape != (diff.size, diff.size):
            raise DimensionMismatch(f"Sigma has shape {S.shape}, expected {(diff.size,) * 2}")
        if not np.allclose(S, S.T, rtol=1e-12, atol=1e-12):
            raise DataError("Sigma must be symmetric")
        q = float(diff @ S @ diff)
        if q < -1e-12 * max(1.0, float(np.abs(S).max()) * float(diff @ diff)):
            raise DataError(f"Sigma is not positive semidefinite (quadratic form {q:.3g})")
        sig = math.sqrt(max(q, 0.0))
    return {
        "l2_error": l2,
        "sigma_norm_error": sig,
        "mu_error": abs(float(result.mu_hat) - float(truth.mu_star)),
    }

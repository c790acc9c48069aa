"""Huber loss and the SLOPE-penalized Huber regression solver.

The smooth part is the sample average

    f(beta) = (1/n) sum_i c^2 H((y_i - x_i'beta) / c),   c = c_h * varsigma,

and the penalty is ``c_lambda * c * slope_norm(beta, lam)``. The problem is
solved with accelerated proximal gradient (FISTA) plus a monotone restart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import Dataset
from .slope import SlopeWeights, prox_sorted_l1, slope_norm


def huber_value(t):
    """H(t) = t^2/2 for |t| <= 1 and |t| - 1/2 otherwise."""
    a = np.abs(np.asarray(t, dtype=np.float64))
    out = np.where(a <= 1.0, 0.5 * a * a, a - 0.5)
    return float(out) if out.ndim == 0 else out


def huber_deriv(t):
    """h = H': the identity inside [-1, 1], the sign outside."""
    out = np.clip(np.asarray(t, dtype=np.float64), -1.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HuberSolverConfig:
    max_iters: int = 10000
    rel_obj_tol: float = 1e-10
    step_rule: str = "fixed_inverse_lipschitz"
    backtrack_beta: float = 0.5
    restart: bool = True
    opt_tol: float = 1e-7
    # consecutive iterations below rel_obj_tol before declaring a stall
    stall_patience: int = 50

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.rel_obj_tol < 1:
            raise ValueError("rel_obj_tol must lie in (0, 1)")
        if self.step_rule not in ("fixed_inverse_lipschitz", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if not 0 < self.backtrack_beta < 1:
            raise ValueError("backtrack_beta must lie in (0, 1)")


@dataclass
class HuberSolution:
    beta: np.ndarray
    objective: float
    iterations: int
    reason: str
    opt_residual: float
    lipschitz: float
    restarts: int = 0
    objective_trace: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.reason in ("optimal", "stalled")


def spectral_norm_sq(X, rtol: float = 1e-8, max_iter: int = 5000, seed: int = 0) -> float:
    """Largest eigenvalue of X'X by power iteration.

    The remaining error is extrapolated from the observed geometric
    contraction of the Rayleigh quotient; iteration stops once it is below
    ``rtol`` relative. Falls back to an SVD when the contraction is too slow.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.any(X):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    est, prev_step = 0.0, math.inf
    for _ in range(max_iter):
        Xv = X @ v
        new = float(Xv @ Xv)
        u = X.T @ Xv
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            break
        v = u / nu
        step = new - est
        if 0 <= step < prev_step:
            ratio = step / prev_step if math.isfinite(prev_step) else 1.0
            if ratio < 0.999 and step * ratio / (1.0 - ratio) <= rtol * new:
                return new
        est, prev_step = new, step
    return float(np.linalg.norm(X, 2) ** 2)


def _check_scales(c_h, varsigma, c_lambda):
    if not (c_h > 0 and varsigma > 0 and c_lambda > 0):
        raise ValueError(f"scale parameters must be positive: c_h={c_h}, varsigma={varsigma}, "
                         f"c_lambda={c_lambda}")


def huber_loss(beta, data: Dataset, c: float) -> float:
    r = data.y - data.X @ beta
    return float(c * c * np.mean(huber_value(r / c)))


def huber_gradient(beta, data: Dataset, c: float) -> np.ndarray:
    r = data.y - data.X @ beta
    return -(data.X.T @ (c * huber_deriv(r / c))) / data.m


def penalized_huber_objective(beta, data: Dataset, c_h: float, varsigma: float,
                              c_lambda: float, lam: SlopeWeights) -> float:
    _check_scales(c_h, varsigma, c_lambda)
    beta = np.asarray(beta, dtype=np.float64)
    if beta.size != data.d or len(lam) != data.d:
        raise ValueError("beta, lam and X must agree in dimension")
    c = c_h * varsigma
    return huber_loss(beta, data, c) + c_lambda * c * slope_norm(beta, lam)


def accelerated_prox_grad(obj, grad, prox, x0, L, cfg: HuberSolverConfig, residual, track: bool = False):
    """Monotone-restart FISTA.

    ``obj`` is callable and exposes ``obj.smooth``; ``prox(v, step)`` is the
    proximal map of the penalty; ``residual(x, L)`` is the stopping measure.
    """
    x = x0.copy()
    Fx = obj(x)
    y = x.copy()
    t = 1.0
    restarts = 0
    small = 0
    trace = [Fx] if track else []
    reason = "max_iters"
    res = math.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gy = grad(y)
        if cfg.step_rule == "backtracking":
            fy = obj.smooth(y)
            while True:
                z = prox(y - gy / L, 1.0 / L)
                dz = z - y
                if obj.smooth(z) <= fy + gy @ dz + 0.5 * L * (dz @ dz) * (1 + 1e-12) + 1e-300:
                    break
                L /= cfg.backtrack_beta
        else:
            z = prox(y - gy / L, 1.0 / L)
        Fz = obj(z)
        if cfg.restart and Fz > Fx:
            restarts += 1
            if np.array_equal(y, x):
                # a plain proximal step from x failed to descend: numerical floor
                reason = "stalled"
                break
            y = x.copy()
            t = 1.0
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = z + ((t - 1.0) / t_next) * (z - x)
        change = abs(Fx - Fz) / max(1.0, abs(Fz))
        x, Fx, t = z, Fz, t_next
        if track:
            trace.append(Fx)
        small = small + 1 if change < cfg.rel_obj_tol else 0
        if it % 10 == 0 or small:
            res = residual(x, L)
            if res <= cfg.opt_tol * (1.0 + np.linalg.norm(x)):
                reason = "optimal"
                break
        if small >= cfg.stall_patience:
            reason = "stalled"
            break
    res = residual(x, L)
    if res <= cfg.opt_tol * (1.0 + np.linalg.norm(x)):
        reason = "optimal"
    return x, Fx, it, reason, res, L, restarts, trace


class CompositeObjective:
    def __init__(self, smooth, penalty):
        self.smooth = smooth
        self.penalty = penalty

    def __call__(self, b):
        return self.smooth(b) + self.penalty(b)


def solve_penalized_huber(data: Dataset, c_h: float, varsigma: float, c_lambda: float,
                          lam: SlopeWeights, cfg: Optional[HuberSolverConfig] = None,
                          warm_start=None, lipschitz: Optional[float] = None,
                          track_objective: bool = False) -> HuberSolution:
    """Minimize the SLOPE-penalized Huber objective for the given scale.

    ``lipschitz`` may pass a precomputed ||X||_op^2 / n to skip power iteration.
    Nonconvergence is reported through ``reason == "max_iters"``.
    """
    cfg = cfg or HuberSolverConfig()
    _check_scales(c_h, varsigma, c_lambda)
    if len(lam) != data.d:
        raise ValueError(f"lam has length {len(lam)}, expected {data.d}")
    c = c_h * varsigma
    pen = lam.w * (c_lambda * c)
    x0 = np.zeros(data.d) if warm_start is None else np.array(warm_start, dtype=np.float64)
    if lipschitz is None:
        lipschitz = spectral_norm_sq(data.X) / data.m
    # tiny safety margin: power iteration approaches the top eigenvalue from below
    L = lipschitz * (1.0 + 1e-7)
    if L == 0.0:
        # X = 0: the loss is constant and the penalty alone is minimized at 0
        beta = np.zeros(data.d)
        val = penalized_huber_objective(beta, data, c_h, varsigma, c_lambda, lam)
        return HuberSolution(beta, val, 0, "optimal", 0.0, 0.0)
    if cfg.step_rule == "backtracking":
        L = L * 1e-3

    obj = CompositeObjective(lambda b: huber_loss(b, data, c), lambda b: float(pen @ np.sort(np.abs(b))[::-1]))

    def grad(b):
        return huber_gradient(b, data, c)

    def prox(v, step):
        return prox_sorted_l1(v, pen, step)

    def residual(b, Lcur):
        return float(np.linalg.norm(b - prox(b - grad(b) / Lcur, 1.0 / Lcur)))

    beta, val, it, reason, res, L, restarts, trace = accelerated_prox_grad(
        obj, grad, prox, x0, L, cfg, residual, track_objective)
    return HuberSolution(beta, val, it, reason, res, L, restarts, trace)


def optimality_residual(beta, data: Dataset, c_h, varsigma, c_lambda, lam: SlopeWeights,
                        lipschitz: Optional[float] = None) -> float:
    """||beta - prox(beta - grad f(beta) / L_f)|| with L_f = ||X||_op^2 / n."""
    c = c_h * varsigma
    if lipschitz is None:
        lipschitz = spectral_norm_sq(data.X) / data.m
    g = huber_gradient(beta, data, c)
    return float(np.linalg.norm(beta - prox_sorted_l1(beta - g / lipschitz, lam.w * (c_lambda * c),
                                                      1.0 / lipschitz)))

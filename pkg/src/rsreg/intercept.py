"""Square-root SLOPE intercept estimation.

Minimizes  sqrt(sum_i (z_i - mu - sqrt(m) theta_i)^2) + c_iota * ||theta||_iota
over (mu, theta) by alternating minimization of the equivalent scaled form

    sum_i (z_i - mu - sqrt(m) theta_i)^2 / (2 sigma) + sigma / 2 + c_iota ||theta||_iota,

whose minimum over sigma > 0 is attained at sigma = root of the residual sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .huber import CompositeObjective, HuberSolverConfig, accelerated_prox_grad
from .slope import SlopeWeights, prox_sorted_l1, slope_norm


@dataclass(frozen=True)
class InterceptSolverConfig:
    c_iota: float = 80.0
    max_outer: int = 500
    rel_tol: float = 1e-9
    sigma_floor: float = 1e-12
    inner_max_iters: int = 5000

    def __post_init__(self):
        if not self.c_iota > 0:
            raise ValueError("c_iota must be positive")
        if (self.max_outer < 1 or self.inner_max_iters < 1 or not self.rel_tol > 0
                or not self.sigma_floor > 0):
            raise ValueError("iteration counts, rel_tol and sigma_floor must be positive")


@dataclass
class InterceptSolution:
    mu_hat: float
    theta_hat: np.ndarray
    objective: float
    iterations: int
    converged: bool
    objective_trace: list = field(default_factory=list)


def sqrt_slope_objective(mu: float, theta, z, iota: SlopeWeights, c_iota: float) -> float:
    z = np.asarray(z, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size != z.size or len(iota) != z.size:
        raise ValueError(f"length mismatch: z {z.size}, theta {theta.size}, iota {len(iota)}")
    r = z - mu - math.sqrt(z.size) * theta
    return float(np.linalg.norm(r) + c_iota * slope_norm(theta, iota))


def solve_intercept(z, iota: SlopeWeights, cfg: InterceptSolverConfig = None) -> InterceptSolution:
    """Alternate exact sigma updates with joint (mu, theta) minimization.

    For fixed sigma, mu is eliminated (it is the mean of z - sqrt(m) theta) and
    theta solves a centered SLOPE least-squares problem by accelerated
    proximal gradient, warm started across outer iterations. Updating mu and
    theta one at a time instead stalls: when most theta_i are active the pair
    can only move along a nearly flat diagonal.
    """
    cfg = cfg or InterceptSolverConfig()
    z = np.asarray(z, dtype=np.float64).ravel()
    m = z.size
    if m < 2:
        raise ValueError("need at least two residuals")
    if len(iota) != m:
        raise ValueError(f"iota has length {len(iota)}, expected {m}")
    rm = math.sqrt(m)
    theta = np.zeros(m)
    mu = float(np.mean(z))

    def objective(mu, theta):
        return float(np.linalg.norm(z - mu - rm * theta) + cfg.c_iota * slope_norm(theta, iota))

    F = objective(mu, theta)
    trace = [F]
    converged = False
    it = 0
    for it in range(1, cfg.max_outer + 1):
        sigma = max(cfg.sigma_floor, float(np.linalg.norm(z - mu - rm * theta)))
        theta = _centered_theta(z, theta, iota, cfg.c_iota, sigma, cfg.inner_max_iters)
        mu = float(np.mean(z - rm * theta))
        F_new = objective(mu, theta)
        trace.append(F_new)
        done = abs(F - F_new) <= cfg.rel_tol * max(abs(F_new), 1e-300) or F_new == 0.0
        F = F_new
        if done:
            converged = True
            break
    return InterceptSolution(mu, theta, F, it, converged, trace)


def _centered_theta(z, theta0, iota, c_iota, sigma, max_iters):
    """argmin_theta ||P(z - sqrt(m) theta)||^2 / (2 sigma) + c_iota ||theta||_iota,
    P the centering projector."""
    m = z.size
    rm = math.sqrt(m)
    pen = iota.w * c_iota

    def smooth(th):
        r = z - rm * th
        r = r - r.mean()
        return float(r @ r) / (2.0 * sigma)

    def grad(th):
        r = z - rm * th
        return -rm * (r - r.mean()) / sigma

    def prox(v, step):
        return prox_sorted_l1(v, pen, step)

    def residual(th, L):
        return float(np.linalg.norm(th - prox(th - grad(th) / L, 1.0 / L)))

    obj = CompositeObjective(smooth, lambda th: float(pen @ np.sort(np.abs(th))[::-1]))
    inner = HuberSolverConfig(max_iters=max_iters, rel_obj_tol=1e-15, opt_tol=1e-13)
    th, *_ = accelerated_prox_grad(obj, grad, prox, theta0, m / sigma * (1 + 1e-12), inner, residual)
    return th

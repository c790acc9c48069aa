"""Median-of-means estimators on contiguous blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

EPS_SCALE = 1e-12


@dataclass(frozen=True)
class BlockPlan:
    """B contiguous blocks of size N over the first B*N indices; the tail is dropped."""

    B: int
    N: int

    @classmethod
    def for_length(cls, m: int, B: int) -> "BlockPlan":
        if not 1 <= B <= m:
            raise ValueError(f"block count must lie in [1, {m}], got {B}")
        return cls(B, m // B)

    def ranges(self):
        return [(k * self.N, (k + 1) * self.N) for k in range(self.B)]


def block_means(values, B: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    plan = BlockPlan.for_length(v.size, B)
    return v[: plan.B * plan.N].reshape(plan.B, plan.N).mean(axis=1)


def lower_median(a) -> float:
    """The ceil(k/2)-th smallest entry; always one of the inputs."""
    a = np.asarray(a, dtype=np.float64)
    k = (a.size + 1) // 2
    return float(np.partition(a, k - 1)[k - 1])


def mom_intercept(residuals, B: int) -> float:
    """Lower median of the block means of the signed residuals."""
    return lower_median(block_means(residuals, B))


def robust_absolute_moment(residuals, B: int) -> float:
    """8 x the lower median of block means of |r|, floored at EPS_SCALE."""
    return max(8.0 * lower_median(block_means(np.abs(residuals), B)), EPS_SCALE)


def default_block_count(m: int, delta: float = 0.05, known_o: Optional[int] = None) -> int:
    """Odd block count.

    With a known outlier count: max(128 log(1/delta), 8 o) rounded up to odd,
    capped at m. Otherwise blocks of roughly 20 samples.
    """
    if m < 3:
        raise ValueError(f"need at least 3 samples, got {m}")
    if known_o is not None:
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        B = math.ceil(max(128.0 * math.log(1.0 / delta), 8.0 * known_o))
        if B % 2 == 0:
            B += 1
        return min(m, B)
    return min(max(2 * (m // 40) + 1, 3), m)

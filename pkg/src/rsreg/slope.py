"""Sorted-l1 (SLOPE) norm, its proximal operator and the weight builders."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class SlopeWeights:
    """Non-increasing, nonnegative weights w_1 >= ... >= w_k >= 0 with w_1 > 0."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True).ravel()
        if w.size == 0:
            raise ValueError("weights must be nonempty")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(np.diff(w) > 0):
            raise ValueError("weights must be non-increasing")
        if not w[0] > 0:
            raise ValueError("at least one weight must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __len__(self):
        return self.w.size

    def scaled(self, c: float) -> "SlopeWeights":
        return SlopeWeights(self.w * c)


def _weights(w) -> np.ndarray:
    return w.w if isinstance(w, SlopeWeights) else np.asarray(w, dtype=np.float64)


def slope_norm(v, w) -> float:
    """sum_i w_i |v|_(i), with |v|_(1) >= |v|_(2) >= ... the sorted magnitudes."""
    v = np.asarray(v, dtype=np.float64).ravel()
    w = _weights(w)
    if v.size != w.size:
        raise ValueError(f"length mismatch: v has {v.size}, weights have {w.size}")
    return float(np.dot(np.sort(np.abs(v))[::-1], w))


def _nonincreasing_fit(z: np.ndarray) -> np.ndarray:
    """Least-squares projection of z onto non-increasing sequences (PAVA)."""
    k = z.size
    sums = np.empty(k)
    counts = np.empty(k, dtype=np.int64)
    top = -1
    for i in range(k):
        top += 1
        sums[top] = z[i]
        counts[top] = 1
        # merge while the newer block mean exceeds the older one
        while top > 0 and sums[top] * counts[top - 1] > sums[top - 1] * counts[top]:
            sums[top - 1] += sums[top]
            counts[top - 1] += counts[top]
            top -= 1
    return np.repeat(sums[: top + 1] / counts[: top + 1], counts[: top + 1])


def prox_sorted_l1(v, w, t: float = 1.0) -> np.ndarray:
    """Proximal operator of ``t * slope_norm(., w)`` evaluated at ``v``.

    Ties in |v| are ordered by original index so the result is deterministic.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    w = _weights(w)
    if v.size != w.size:
        raise ValueError(f"length mismatch: v has {v.size}, weights have {w.size}")
    if not t > 0:
        raise ValueError(f"step must be positive, got {t}")
    mag = np.abs(v)
    order = np.argsort(-mag, kind="stable")
    fitted = np.maximum(_nonincreasing_fit(mag[order] - t * w), 0.0)
    out = np.empty_like(v)
    out[order] = fitted
    return np.copysign(out, v) * (out != 0)


def lambda_weights(d: int, n: int) -> SlopeWeights:
    """Coefficient weights lambda_i = sqrt(log(e d / i) / n), i = 1..d."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    i = np.arange(1, d + 1)
    return SlopeWeights(np.sqrt((1.0 + np.log(d / i)) / n))


def iota_weights(n: int, regime: str = "subgaussian", M: Optional[float] = None,
                 known_o: Optional[int] = None) -> SlopeWeights:
    """Outlier weights for the intercept stage.

    regime "heavy" uses n^{-1/2} (n/i)^{1/M}; "subgaussian" uses
    sqrt(log(e n / i) / n). With ``known_o`` the sequence is flat at its
    value for i = o.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if regime not in ("heavy", "subgaussian"):
        raise ValueError(f"unknown regime {regime!r}")
    if regime == "heavy" and (M is None or not M > 2):
        raise ValueError(f"heavy regime requires moment order M > 2, got {M}")
    if known_o is not None:
        if not 1 <= known_o <= n:
            raise ValueError(f"known_o must lie in [1, {n}], got {known_o}")
        i = np.full(n, float(known_o))
    else:
        i = np.arange(1, n + 1, dtype=np.float64)
    if regime == "heavy":
        w = (n / i) ** (1.0 / M) / math.sqrt(n)
    else:
        w = np.sqrt((1.0 + np.log(n / i)) / n)
    return SlopeWeights(w)

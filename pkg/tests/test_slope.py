import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import prox_oracle, sorted_l1, subgradient_gap
from rsreg.slope import SlopeWeights, iota_weights, lambda_weights, prox_sorted_l1, slope_norm

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@st.composite
def prox_case(draw, max_k=8):
    k = draw(st.integers(1, max_k))
    v = np.array(draw(st.lists(finite, min_size=k, max_size=k)))
    w = np.sort(np.array(draw(st.lists(st.floats(0, 5), min_size=k, max_size=k))))[::-1]
    w[0] += 0.1
    t = draw(st.floats(0.01, 10))
    return v, w, t


def test_weights_validation():
    for bad in ([], [1.0, 2.0], [1.0, -0.1], [0.0, 0.0], [math.nan]):
        with pytest.raises(ValueError):
            SlopeWeights(bad)
    w = SlopeWeights([2.0, 1.0, 0.0])
    assert len(w) == 3 and np.array_equal(w.scaled(2).w, [4.0, 2.0, 0.0])


def test_norm_examples():
    assert slope_norm(np.zeros(3), [3.0, 2.0, 1.0]) == 0.0
    assert slope_norm([-1.0, 3.0], [2.0, 1.0]) == 7.0
    v = np.array([0.5, -2.0, 1.5])
    assert slope_norm(v, np.full(3, 0.7)) == pytest.approx(0.7 * np.abs(v).sum(), rel=1e-15)
    with pytest.raises(ValueError):
        slope_norm([1.0], [1.0, 1.0])


def test_prox_examples():
    assert np.array_equal(prox_sorted_l1(np.zeros(4), [4.0, 3.0, 2.0, 1.0]), np.zeros(4))
    assert np.array_equal(prox_sorted_l1([3.0], [1.0], 1.0), [2.0])
    with pytest.raises(ValueError):
        prox_sorted_l1([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        prox_sorted_l1([1.0], [1.0], 0.0)


def test_prox_two_dim_grid_oracle():
    v, w = np.array([4.0, 1.5]), np.array([2.0, 1.0])

    def objective(B):
        mags = -np.sort(-np.abs(B), axis=1)
        return 0.5 * np.sum((B - v) ** 2, axis=1) + mags @ w

    # dense 1e-2 grid on [-5, 5]^2, then a 1e-4 grid around the best point
    g = np.arange(-500, 501) * 1e-2
    B = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    best = B[np.argmin(objective(B))]
    f = np.arange(-200, 201) * 1e-4
    B = best + np.stack(np.meshgrid(f, f, indexing="ij"), axis=-1).reshape(-1, 2)
    best = B[np.argmin(objective(B))]
    out = prox_sorted_l1(v, w, 1.0)
    assert np.max(np.abs(out - best)) <= 1e-4
    assert np.max(np.abs(out - prox_oracle(v, w, 1.0))) <= 1e-6


def test_prox_matches_oracle_on_seeded_cases():
    rng = np.random.default_rng(11)
    for _ in range(60):
        d = int(rng.integers(1, 5))
        v = rng.normal(0, 3, d)
        w = np.sort(rng.uniform(0, 2, d))[::-1] + 1e-3
        t = rng.uniform(0.1, 3)
        assert np.max(np.abs(prox_sorted_l1(v, w, t) - prox_oracle(v, w, t))) <= 1e-6


@given(prox_case())
def test_prox_subgradient_condition(case):
    v, w, t = case
    b = prox_sorted_l1(v, w, t)
    dual_excess, alignment = subgradient_gap(v, b, w, t)
    scale = 1.0 + float(np.abs(v).max())
    assert dual_excess <= 1e-10 * scale
    assert alignment <= 1e-10 * scale * scale


@given(prox_case(), st.randoms(use_true_random=False))
def test_prox_odd_and_permutation_equivariant(case, rnd):
    v, w, t = case
    b = prox_sorted_l1(v, w, t)
    assert np.array_equal(prox_sorted_l1(-v, w, t), -b)
    perm = np.random.default_rng(rnd.randint(0, 2**32 - 1)).permutation(v.size)
    assert np.allclose(prox_sorted_l1(v[perm], w, t), b[perm], rtol=0, atol=1e-12)


@given(prox_case(), st.integers(0, 2**32 - 1))
def test_prox_nonexpansive(case, seed):
    v, w, t = case
    u = v + np.random.default_rng(seed).normal(0, 5, v.size)
    gap = np.linalg.norm(prox_sorted_l1(u, w, t) - prox_sorted_l1(v, w, t))
    assert gap <= np.linalg.norm(u - v) * (1 + 1e-12) + 1e-12


@given(arrays(np.float64, st.integers(1, 10), elements=finite), st.floats(0.01, 5), st.floats(0.01, 5))
def test_flat_weights_soft_threshold(v, c, t):
    out = prox_sorted_l1(v, np.full(v.size, c), t)
    soft = np.sign(v) * np.maximum(np.abs(v) - t * c, 0.0)
    assert np.allclose(out, soft, rtol=0, atol=1e-12 * (1 + np.abs(v).max()))


@given(prox_case(), st.integers(0, 2**32 - 1), st.floats(-20, 20))
def test_norm_triangle_and_homogeneity(case, seed, a):
    v, w, _ = case
    u = np.random.default_rng(seed).normal(0, 5, v.size)
    assert slope_norm(u + v, w) <= slope_norm(u, w) + slope_norm(v, w) + 1e-9
    assert slope_norm(a * v, w) == pytest.approx(abs(a) * slope_norm(v, w), rel=1e-12, abs=1e-12)
    assert slope_norm(v, w) == pytest.approx(sorted_l1(v, w), rel=1e-12, abs=1e-12)


def test_lambda_weights_examples():
    assert lambda_weights(1, 1).w[0] == pytest.approx(1.0, rel=1e-15)
    for d in (1, 7, 50):
        assert lambda_weights(d, 36).w[-1] == pytest.approx(1 / 6, rel=1e-14)
    assert lambda_weights(4, 100).w[0] == pytest.approx(math.sqrt(math.log(4 * math.e) / 100), rel=1e-14)
    # log(4e) = 2.38629..., so the value is 0.154476... (not 0.15569)
    assert lambda_weights(4, 100).w[0] == pytest.approx(0.1544764, abs=1e-7)
    with pytest.raises(ValueError):
        lambda_weights(0, 5)


def test_iota_weights_examples():
    n = 25
    assert iota_weights(n, "heavy", M=3.0).w[-1] == pytest.approx(1 / 5, rel=1e-14)
    assert iota_weights(n).w[-1] == pytest.approx(1 / 5, rel=1e-14)
    assert iota_weights(16, "heavy", M=4.0).w[0] == pytest.approx(0.5, rel=1e-14)
    flat = iota_weights(100, "heavy", M=4.0, known_o=5).w
    assert np.all(flat == flat[0]) and flat[0] == pytest.approx(0.1 * 20 ** 0.25, rel=1e-14)
    flat = iota_weights(100, known_o=5).w
    assert flat[0] == pytest.approx(math.sqrt(math.log(100 * math.e / 5) / 100), rel=1e-14)
    for kwargs in (dict(regime="heavy", M=2.0), dict(regime="heavy"), dict(known_o=0),
                   dict(known_o=11), dict(regime="weird")):
        with pytest.raises(ValueError):
            iota_weights(10, **kwargs)


@given(st.integers(1, 300), st.integers(1, 10**5), st.floats(2.01, 50))
def test_weight_builders_nonincreasing(d, n, M):
    for w in (lambda_weights(d, n).w, iota_weights(d, "heavy", M).w, iota_weights(d).w):
        assert np.all(np.diff(w) <= 0) and np.all(w > 0)

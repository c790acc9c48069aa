import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rsreg.model import (DataError, Dataset, DimensionMismatch, FitResult, GroundTruth,
                         NoiseSpec, NonFiniteEntry, StageError, TheoryParams, error_metrics,
                         validate_dataset)


def _truth(beta_star, mu_star=0.0):
    return GroundTruth(np.asarray(beta_star, float), mu_star, [], np.zeros(1), NoiseSpec())


def _fit(beta_hat, mu_hat=0.0):
    return FitResult(np.asarray(beta_hat, float), mu_hat, (1.0,), 1)


def test_validate_ok_and_idempotent():
    data = Dataset([1.0, 2.0], np.ones((2, 3)))
    assert validate_dataset(data) is data
    assert validate_dataset(validate_dataset(data)) is data


def test_dimension_mismatch_names_lengths():
    with pytest.raises(DimensionMismatch, match="length 3"):
        validate_dataset(Dataset([1.0, 2.0, 3.0], np.ones((2, 3))))


def test_nonfinite_names_index():
    with pytest.raises(NonFiniteEntry, match=r"y\[1\]"):
        validate_dataset(Dataset([1.0, math.nan], np.ones((2, 1))))
    X = np.ones((3, 2))
    X[2, 1] = math.inf
    with pytest.raises(NonFiniteEntry, match=r"X\[2, 1\]"):
        validate_dataset(Dataset(np.zeros(3), X))


def test_dataset_is_read_only_copy():
    y = np.array([1.0, 2.0])
    data = Dataset(y, np.ones((2, 1)))
    y[0] = 99.0
    assert data.y[0] == 1.0
    with pytest.raises(ValueError):
        data.y[0] = 5.0


def test_metrics_identity_case():
    out = error_metrics(_fit([1.0, -2.0], 0.5), _truth([1.0, -2.0], 0.5))
    assert out == {"l2_error": 0.0, "sigma_norm_error": 0.0, "mu_error": 0.0}


def test_metrics_three_four_five():
    out = error_metrics(_fit([3.0, 4.0], -2.0), _truth([0.0, 0.0]), np.eye(2))
    assert out["l2_error"] == 5.0 and out["sigma_norm_error"] == 5.0 and out["mu_error"] == 2.0


def test_metrics_diagonal_quadratic_form():
    out = error_metrics(_fit([1.0, 0.0]), _truth([0.0, 0.0]), np.diag([4.0, 1.0]))
    assert out["sigma_norm_error"] == 2.0


def test_metrics_errors():
    with pytest.raises(DimensionMismatch):
        error_metrics(_fit([1.0]), _truth([1.0, 2.0]))
    with pytest.raises(DataError, match="semidefinite"):
        error_metrics(_fit([1.0, 0.0]), _truth([0.0, 0.0]), np.diag([-1.0, 1.0]))
    with pytest.raises(DataError, match="symmetric"):
        error_metrics(_fit([1.0, 0.0]), _truth([0.0, 0.0]), np.array([[1.0, 0.5], [0.0, 1.0]]))


vec = st.lists(st.floats(-10, 10), min_size=1, max_size=6)


@given(vec, st.randoms(use_true_random=False))
def test_metrics_permutation_invariant(values, rnd):
    d = len(values)
    rng = np.random.default_rng(rnd.randint(0, 2**32 - 1))
    diff = np.array(values)
    A = rng.normal(size=(d, d))
    S = A @ A.T
    perm = rng.permutation(d)
    base = error_metrics(_fit(diff), _truth(np.zeros(d)), S)
    permuted = error_metrics(_fit(diff[perm]), _truth(np.zeros(d)), S[np.ix_(perm, perm)])
    assert permuted["sigma_norm_error"] == pytest.approx(base["sigma_norm_error"], rel=1e-9, abs=1e-12)
    assert permuted["l2_error"] == pytest.approx(base["l2_error"], rel=1e-12)


@given(vec, st.floats(1e-3, 1e3))
def test_metrics_scaled_identity(values, c):
    d = len(values)
    out = error_metrics(_fit(values), _truth(np.zeros(d)), c * np.eye(d))
    assert out["sigma_norm_error"] == pytest.approx(math.sqrt(c) * out["l2_error"], rel=1e-12, abs=1e-300)


def test_noise_spec_rules():
    assert NoiseSpec().M == math.inf
    assert NoiseSpec("student_t", 1.0, 4.0).M == 3.0
    assert NoiseSpec("none", 0.0).family == "none"
    for bad in [dict(family="none", sigma_star=1.0), dict(family="gaussian", sigma_star=0.0),
                dict(family="student_t", param=2.0), dict(family="student_t", param=4.0, moment_order=5.0),
                dict(family="pareto_symmetric", param=None), dict(family="cauchy")]:
        with pytest.raises(ValueError):
            NoiseSpec(**bad)


def test_theory_params_rules():
    TheoryParams(delta=1 / 9)
    with pytest.raises(ValueError):
        TheoryParams(delta=0.2)
    with pytest.raises(ValueError):
        TheoryParams(L=0.5)


def test_fit_result_rules():
    with pytest.raises(ValueError):
        FitResult(np.zeros(2), 0.0, (1.0, 0.0), 1)
    assert FitResult(np.zeros(2), 0.0, (3.0, 2.0), 1).varsigma_final == 2.0


def test_ground_truth_counts():
    t = GroundTruth(np.array([1.0, 0.0, -1.0]), 0.0, [4, 7], np.eye(1, 10, 4).ravel(), NoiseSpec())
    assert t.s == 2 and t.o == 2


def test_stage_error_carries_cause():
    e = StageError("intercept", ValueError("boom"))
    assert e.stage == "intercept" and isinstance(e.cause, ValueError) and "boom" in str(e)

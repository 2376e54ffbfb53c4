import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indexfund.errors import DegenerateInputError, InsufficientDataError
from indexfund.similarity import correlation, covariance
from oracles import pearson, sample_cov


def test_identical_series_fully_correlated():
    a = np.array([0.01, -0.02, 0.03, 0.0])
    assert correlation(np.column_stack([a, a]))[0, 1] == pytest.approx(1.0, abs=1e-15)


def test_negated_series_anticorrelated():
    a = np.array([0.01, -0.02, 0.03, 0.0])
    assert correlation(np.column_stack([a, -a]))[0, 1] == pytest.approx(-1.0, abs=1e-15)


def test_matches_textbook_pearson():
    a = [0.01, -0.01, 0.02]
    b = [0.02, 0.00, 0.01]
    rho = correlation(np.column_stack([a, b]))
    assert abs(rho[0, 1] - pearson(a, b)) <= 1e-12
    assert rho[0, 0] == rho[1, 1] == 1.0


def test_zero_variance_stock_named():
    r = np.column_stack([[0.01, 0.02, 0.03], [0.05, 0.05, 0.05]])
    with pytest.raises(DegenerateInputError, match="'1'"):
        correlation(r)


def test_correlation_invariants(rng):
    rho = correlation(rng.normal(size=(40, 7)))
    np.testing.assert_array_equal(rho, rho.T)
    np.testing.assert_array_equal(np.diag(rho), 1.0)
    assert rho.min() >= -1 and rho.max() <= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.floats(0.01, 100), min_size=4, max_size=4),
       st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_correlation_affine_invariant(seed, scales, shifts):
    r = np.random.default_rng(seed).normal(size=(30, 4))
    np.testing.assert_allclose(correlation(r * scales + shifts), correlation(r), atol=1e-10)


def test_constant_returns_zero_covariance():
    v = covariance(np.full((10, 3), 0.01), 5)
    np.testing.assert_array_equal(v, 0.0)


def test_two_point_variance():
    v = covariance(np.array([[0.01], [0.03]]), 2)
    assert v[0, 0] == pytest.approx(0.0002 * (1 + 1e-8), rel=1e-12)


def test_covariance_matches_oracle(rng):
    r = rng.normal(size=(10, 3)) * 0.01
    v = covariance(r, 10)
    ref = sample_cov(r)
    ref[np.diag_indices(3)] += 1e-8 * np.trace(ref) / 3
    np.testing.assert_allclose(v, ref, rtol=0, atol=1e-12)


def test_covariance_uses_trailing_window(rng):
    r = rng.normal(size=(50, 4))
    np.testing.assert_array_equal(covariance(r, 20), covariance(r[-20:], 20))


def test_window_too_large():
    with pytest.raises(InsufficientDataError):
        covariance(np.zeros((5, 2)), 6)
    with pytest.raises(InsufficientDataError):
        covariance(np.zeros((5, 2)), 1)


def test_covariance_psd_with_short_window(rng):
    v = covariance(rng.normal(size=(10, 25)) * 0.02, 10)
    np.testing.assert_array_equal(v, v.T)
    assert np.linalg.eigvalsh(v).min() >= -1e-10
    w = rng.normal(size=(100, 25))
    assert np.einsum("ki,ij,kj->k", w, v, w).min() >= -1e-10


def test_correlation_from_covariance(rng):
    r = rng.normal(size=(60, 5)) * 0.02
    v = covariance(r, ridge_scale=0.0)
    s = np.sqrt(np.diag(v))
    np.testing.assert_allclose(correlation(r), v / np.outer(s, s), atol=1e-10)

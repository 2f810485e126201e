import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rosenblatt.errors import InsufficientDataError, SpecificationError, StructuralError
from rosenblatt.stats import (Ensemble, EstimateWithError, covariance_matrix_estimate,
                              empirical_covariance, k_statistics, ks_two_sample, mean_with_error,
                              scaling_exponent, shape_correlation)


def _brownian(n, t, seed):
    dt = np.diff(np.concatenate([[0.0], t]))
    z = np.random.default_rng(seed).standard_normal((n, t.size)) * np.sqrt(dt)
    return Ensemble(np.cumsum(z, axis=1), t)


def test_ensemble_shape_check():
    with pytest.raises(StructuralError):
        Ensemble(np.zeros((3, 2)), [0.0, 1.0, 2.0])


def test_covariance_and_jackknife_error():
    t = np.array([0.5, 1.0])
    ens = _brownian(4000, t, 0)
    e = empirical_covariance(ens, 0, 1)
    # Var of the sample covariance of Gaussians: (σ_xy² + σ_x²σ_y²)/n
    assert e.stderr == pytest.approx(np.sqrt((0.25 + 0.5) / 4000), rel=0.1)
    assert e.within(0.5, 4)
    cov, se = covariance_matrix_estimate(ens)
    assert np.allclose(cov, cov.T) and cov[1, 1] == pytest.approx(np.var(ens.values[:, 1], ddof=1))
    with pytest.raises(InsufficientDataError):
        empirical_covariance(_brownian(10, t, 1), 0, 1)


@given(st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_jackknife_matches_loop(seed):
    ens = _brownian(40, np.array([0.3, 1.0]), seed)
    e = empirical_covariance(ens, 0, 1)
    x, y = ens.values[:, 0], ens.values[:, 1]
    loo = np.array([np.cov(np.delete(x, i), np.delete(y, i))[0, 1] for i in range(40)])
    ref = np.sqrt(39 / 40 * np.sum((loo - loo.mean()) ** 2))
    assert e.stderr == pytest.approx(ref, rel=1e-9)


def test_k_statistics():
    x = np.random.default_rng(3).exponential(size=4000)
    k3 = k_statistics(x, 3, resamples=200)
    assert abs(k3.value - 2.0) < 4 * k3.stderr
    assert k_statistics(np.ones(100), 2).value == 0.0
    with pytest.raises(InsufficientDataError):
        k_statistics(x[:50], 3)
    with pytest.raises(SpecificationError):
        k_statistics(x, 5)


def test_scaling_exponent_brownian():
    t = np.array([0.1, 0.2, 0.4, 0.8, 1.0])
    est = scaling_exponent(_brownian(3000, t, 4), t)
    assert est.within(1.0, 4)
    with pytest.raises(SpecificationError):
        scaling_exponent(_brownian(100, t, 4), t[2:])


def test_shape_correlation():
    a = np.array([[1.0, 0.5], [0.5, 2.0]])
    c, s = shape_correlation(3 * a, a)
    assert c == pytest.approx(1.0) and s == pytest.approx(3.0)
    with pytest.raises(StructuralError):
        shape_correlation(a, np.eye(3))


def test_ks_two_sample():
    rng = np.random.default_rng(5)
    assert ks_two_sample(rng.normal(size=500), rng.normal(size=500))["pvalue"] > 1e-3
    assert ks_two_sample(rng.normal(size=500), 0.5 + rng.normal(size=500))["pvalue"] < 1e-3
    with pytest.raises(InsufficientDataError):
        ks_two_sample(np.zeros(10), np.zeros(100))


def test_mean_with_error():
    e = mean_with_error([1.0, 2.0, 3.0])
    assert isinstance(e, EstimateWithError) and e.value == 2.0 and e.as_dict()["n"] == 3

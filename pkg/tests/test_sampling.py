import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rosenblatt.errors import ParameterError, SpectralValidityError
from rosenblatt.sampling import (GaussianStationarySpec, RngStream, circulant_eigenvalues,
                                 gaussian_stationary_sequence, poisson_field, rademacher_charges,
                                 stable_increments, stable_variates)


def test_streams_reproducible_and_distinct():
    a = RngStream(7, 3).generator().random(5)
    b = RngStream(7, 3).generator().random(5)
    c = RngStream(7, 4).generator().random(5)
    d = RngStream(7, 3).child(1).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)


@pytest.mark.parametrize("alpha", [0.6, 0.75, 1.0, 1.5])
def test_stable_variates_match_scipy_law(alpha):
    # scipy's S1 parameterisation with beta=0 has E e^{izX} = e^{-|z|^alpha}
    x = stable_variates(alpha, 20000, np.random.default_rng(1))
    p = stats.kstest(x, stats.levy_stable(alpha, 0.0).cdf).pvalue
    assert p > 1e-3


def test_alpha_two_is_gaussian_with_variance_two():
    x = stable_variates(2.0, 200000, np.random.default_rng(2))
    assert abs(x.var() - 2.0) < 0.03


@given(st.floats(0.55, 1.95), st.floats(0.01, 10.0))
@settings(max_examples=20, deadline=None)
def test_empirical_characteristic_function(alpha, dt):
    x = stable_increments(alpha, dt, 40000, RngStream(3))
    z = 0.7
    ecf = np.mean(np.cos(z * x))
    assert abs(ecf - np.exp(-dt * z ** alpha)) < 0.02


def test_stable_increments_reject_bad_index():
    with pytest.raises(ParameterError):
        stable_increments(2.5, 1.0, 10, RngStream(0))
    with pytest.raises(ParameterError):
        stable_increments(0.75, 0.0, 10, RngStream(0))


def test_gaussian_sequence_covariance():
    spec = GaussianStationarySpec.donsker(0.75, 16)
    y = gaussian_stationary_sequence(spec, RngStream(5), size=40000)
    emp = np.array([np.mean(y[:, 0] * y[:, j]) for j in range(16)])
    assert np.max(np.abs(emp - spec.r)) < 0.03


def test_single_draw_shape():
    spec = GaussianStationarySpec.donsker(0.75, 8)
    assert gaussian_stationary_sequence(spec, RngStream(1)).shape == (8,)


def test_donsker_embedding_is_nonnegative():
    lam, m = circulant_eigenvalues(GaussianStationarySpec.donsker(0.9, 4096).r)
    assert m == 2 * 4095
    assert lam.min() > -1e-10 * lam.max()


def test_indefinite_embedding_raises():
    with pytest.raises(SpectralValidityError) as exc:
        gaussian_stationary_sequence(GaussianStationarySpec(np.array([1.0, 0.9, -0.9])), RngStream(0))
    assert exc.value.worst_eigenvalue < 0


def test_poisson_field_and_charges():
    counts = [poisson_field(2.0, 5.0, RngStream(0, i)).count for i in range(400)]
    assert abs(np.mean(counts) - 20.0) < 0.8
    f = poisson_field(1.0, 3.0, RngStream(1))
    assert np.all(np.abs(f.points) <= 3.0)
    q = rademacher_charges(10000, RngStream(2))
    assert set(np.unique(q)) == {-1, 1}
    assert abs(q.mean()) < 0.05
    with pytest.raises(ParameterError):
        poisson_field(0.0, 1.0, RngStream(0))

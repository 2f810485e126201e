import json
import math

import numpy as np
import pytest

from rosenblatt.errors import ParameterError, ResourceError, SpecificationError, StructuralError
from rosenblatt.process import (SpectralGridSpec, covariance_matrix, donsker_ensemble,
                                donsker_prelimit_variance, read_paths_csv, rosenblatt_covariance,
                                selfsimilarity_check, spectral_discrete_covariance, spectral_ensemble,
                                spectral_path, write_paths_csv)
from rosenblatt.sampling import RngStream
from rosenblatt.stats import Ensemble, covariance_matrix_estimate

T9 = np.linspace(0.0, 1.0, 9)


@pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
def test_covariance_forms(H):
    t = np.array([0.3, 1.0, 2.5])
    assert np.allclose(np.diag(covariance_matrix(t, H)), t ** (2 * H))
    sub = np.diag(covariance_matrix(t, H, "sub"))
    assert np.allclose(sub, (2 - 2 ** (2 * H - 1)) * t ** (2 * H))
    for v in ("standard", "sub"):
        assert np.linalg.eigvalsh(covariance_matrix(t, H, v)).min() > 0


def test_unknown_variant_rejected():
    with pytest.raises(SpecificationError):
        rosenblatt_covariance(1.0, 1.0, 0.75, "super")
    with pytest.raises(ParameterError):
        rosenblatt_covariance(1.0, 1.0, 0.4)


@pytest.mark.parametrize("variant,tol", [("standard", 0.015), ("sub", 0.03)])
def test_discrete_spectral_covariance_close_to_target(variant, tol):
    c = spectral_discrete_covariance(0.75, T9[1:], variant=variant)
    a = covariance_matrix(T9[1:], 0.75, variant)
    assert np.max(np.abs(c / a - 1)) < tol


@pytest.mark.parametrize("variant", ["standard", "sub"])
def test_spectral_ensemble_matches_its_isometry(variant):
    v = spectral_ensemble(0.75, T9[1:], seed=11, paths=3000, variant=variant)
    cov, se = covariance_matrix_estimate(Ensemble(v, T9[1:]))
    exact = spectral_discrete_covariance(0.75, T9[1:], variant=variant)
    z = np.abs(cov - exact) / se
    assert z.max() < 4.0


def test_spectral_mean_zero_and_skewed():
    v = spectral_ensemble(0.75, [1.0], seed=2, paths=4000)[:, 0]
    assert abs(v.mean()) < 4 * v.std() / math.sqrt(v.size)
    from scipy.stats import skew
    assert skew(v) > 0.5


def test_spectral_split_is_deterministic():
    full = spectral_ensemble(0.7, T9, seed=5, paths=130)
    a = spectral_ensemble(0.7, T9, seed=5, paths=64, first_id=0)
    b = spectral_ensemble(0.7, T9, seed=5, paths=66, first_id=64)
    assert np.array_equal(full, np.vstack([a, b]))
    assert full[:, 0].tolist() == [0.0] * 130


def test_spectral_path_object():
    p = spectral_path(0.75, T9, RngStream(1))
    assert p.values.shape == T9.shape
    assert p.values[0] == 0.0


def test_grid_spec_validation():
    with pytest.raises(SpecificationError):
        SpectralGridSpec(lambda_max=1e-5)
    with pytest.raises(SpecificationError):
        spectral_ensemble(0.75, [0.5, 0.2], seed=0, paths=2)


def test_donsker_prelimit_variance_tends_to_one():
    v = [donsker_prelimit_variance(0.75, n) for n in (1 << 10, 1 << 14, 1 << 18)]
    assert abs(v[-1] - 1) < abs(v[0] - 1)
    assert abs(v[-1] - 1) < 0.01


def test_donsker_variance_matches_prelimit():
    v = donsker_ensemble(0.75, 1 << 12, [0.5, 1.0], seed=3, paths=2000)
    x = v[:, 1]
    m2 = x.var(ddof=1)
    se = math.sqrt(np.mean((x - x.mean()) ** 4) - m2 ** 2) / math.sqrt(x.size)
    assert abs(m2 - donsker_prelimit_variance(0.75, 1 << 12)) < 3.5 * se


def test_donsker_rescale():
    v = donsker_ensemble(0.75, 1 << 10, [1.0], seed=4, paths=3000, rescale=True)[:, 0]
    assert abs(v.var() - 1.0) < 0.15


def test_donsker_resource_guard():
    with pytest.raises(ResourceError):
        donsker_ensemble(0.75, (1 << 22) + 1, [1.0], seed=0, paths=1)


def test_selfsimilarity_check_power():
    v1 = spectral_ensemble(0.75, [1.0], seed=1, paths=2000)[:, 0]
    v4 = spectral_ensemble(0.75, [4.0], seed=2, paths=2000)[:, 0]
    assert selfsimilarity_check(v4, v1, 4.0, 0.75)["pvalue"] > 0.001
    assert selfsimilarity_check(v4, v1, 4.0, 0.75, exponent=0.95)["pvalue"] < 0.001


def test_csv_round_trip(tmp_path):
    vals = np.array([[0.0, 1.0 / 3.0, -2e-300], [0.0, np.pi, 1e300]])
    p = tmp_path / "x.csv"
    write_paths_csv(p, [0.0, 0.5, 1.0], vals, {"seed": 1})
    t, back = read_paths_csv(p)
    assert np.array_equal(t, [0.0, 0.5, 1.0])
    assert np.array_equal(back, vals)
    assert json.loads((tmp_path / "x.csv.json").read_text())["seed"] == 1


@pytest.mark.parametrize("body", ["", "a,b,c\n0,0,0\n", "path_id,t,value\n",
                                  "path_id,t,value\n0,0.0,x\n",
                                  "path_id,t,value\n0,0.0,1\n1,0.5,1\n"])
def test_csv_malformed(tmp_path, body):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(StructuralError):
        read_paths_csv(p)

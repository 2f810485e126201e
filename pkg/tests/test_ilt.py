import math
import warnings
from functools import lru_cache

import numpy as np
import pytest
from scipy import integrate

from rosenblatt.errors import ParameterError, SpecificationError, StructuralError
from rosenblatt.ilt import (MollifierSpec, PathPair, StepFunction, check_alpha, discrete_time_kernel,
                            ilt_l2_norm, ilt_mollification_error, ilt_mollified_moment, ilt_pair,
                            mollifier_eval, time_kernel_gT)
from rosenblatt.process import SamplePath


@pytest.mark.parametrize("alpha", [0.5, 1.0, 0.4, 1.2])
def test_alpha_gate(alpha):
    with pytest.raises(ParameterError, match="1/2"):
        check_alpha(alpha)


@pytest.mark.parametrize("shape", ["bump", "bump4"])
def test_mollifier_mass_support_and_transform(shape):
    spec = MollifierSpec(0.3, shape)
    assert integrate.quad(spec, -0.3, 0.3, epsabs=0, epsrel=1e-12)[0] == pytest.approx(1.0, abs=1e-10)
    assert mollifier_eval(spec, np.array([0.3, -0.31, 5.0])).tolist() == [0.0, 0.0, 0.0]
    assert spec.fourier(0.0) == pytest.approx(1.0, abs=1e-10)
    for y in (1.0, 7.5, 30.0):
        ref = integrate.quad(lambda x: spec(x) * math.cos(y * x), -0.3, 0.3, epsabs=1e-13, limit=200)[0]
        assert spec.fourier(y) == pytest.approx(ref, abs=1e-8)


def test_fourier_defect_is_accurate_near_zero():
    spec = MollifierSpec(1.0)
    m2 = integrate.quad(lambda x: x * x * spec(x), -1, 1, epsabs=1e-14)[0]
    assert spec.fourier_defect(1e-4) == pytest.approx(m2 * 1e-8 / 2, rel=1e-6)
    for y in (0.09, 0.11, 3.0):
        ref = integrate.quad(lambda x: 2 * spec(x) * math.sin(y * x / 2) ** 2, -1, 1, epsabs=0, epsrel=1e-12)[0]
        assert spec.fourier_defect(y) == pytest.approx(ref, rel=1e-6)


def test_mollifier_rejects_bad_input():
    with pytest.raises(ParameterError):
        MollifierSpec(0.0)
    with pytest.raises(ParameterError):
        MollifierSpec(0.1, "gauss")


def test_step_function_evaluation_and_transform():
    psi = StepFunction.test_function(1.0, "sub")
    assert psi(np.array([-0.5, 0.0, 0.5, 1.0, 1.5])).tolist() == [-1.0, -1.0, 1.0, 1.0, 0.0]
    assert psi.hull == (-1.0, 1.0)
    assert psi.jumps() == {1.0: 1.0, 0.0: -2.0, -1.0: 1.0}
    for u in (0.0, 0.3, 4.0):
        re = integrate.quad(lambda x: psi(x) * math.cos(u * x), -1, 1, points=[0.0], epsabs=1e-13)[0]
        im = integrate.quad(lambda x: psi(x) * math.sin(u * x), -1, 1, points=[0.0], epsabs=1e-13)[0]
        assert psi.fourier(u) == pytest.approx(complex(re, im), abs=1e-10)
    with pytest.raises(SpecificationError):
        StepFunction(((1.0, (1.0, 0.0)),))


def _g_brute(x, T, alpha):
    # ∫∫_{[0,T]²} e^{−|s−u|a} = 2∫_0^T (T − r) e^{−ra} dr
    a = abs(x) ** alpha
    return 2 * integrate.quad(lambda r: (T - r) * math.exp(-r * a), 0, T, epsabs=0, epsrel=1e-13)[0]


@pytest.mark.parametrize("x", [1e-9, 1e-3, 0.2, 3.0, 40.0])
def test_time_kernel_closed_form(x):
    assert time_kernel_gT(x, 2.0, 0.75) == pytest.approx(_g_brute(x, 2.0, 0.75), rel=1e-8)


def test_time_kernel_series_switch_is_continuous():
    T, al = 5.0, 0.7
    xc = (1e-3 / T) ** (1 / al)
    lo, hi = time_kernel_gT(np.array([xc * (1 - 1e-9), xc * (1 + 1e-9)]), T, al)
    assert lo == pytest.approx(hi, rel=1e-10)


@pytest.mark.parametrize("x", [0.0, 1e-6, 0.01, 0.5, 10.0, 1e4])
def test_discrete_time_kernel_against_sum(x):
    T, dt, al = 2.0, 1 / 16, 0.75
    n = 32
    k = np.arange(n)
    brute = dt * dt * np.exp(-np.abs(k[:, None] - k[None, :]) * dt * abs(x) ** al).sum()
    assert discrete_time_kernel(x, T, al, dt) == pytest.approx(brute, rel=1e-10)


def test_discrete_time_kernel_tends_to_continuum():
    x = np.array([0.1, 1.0, 5.0])
    errs = [np.max(np.abs(discrete_time_kernel(x, 1.0, 0.75, dt) / time_kernel_gT(x, 1.0, 0.75) - 1))
            for dt in (1 / 16, 1 / 256)]
    assert errs[1] < errs[0] < 0.2
    with pytest.raises(ParameterError):
        discrete_time_kernel(x, 1.0, 0.75, 0.3)


def _quadpack_l2(T, al):
    """Nested QUADPACK evaluation of (2π)⁻²∬|1̂_{[0,1]}(x+y)|² g(x) g(y) dx dy."""

    def g(x):
        z = T * abs(x) ** al
        return T * T * (1 - z / 3 + z * z / 12) if z < 1e-4 else 2 * (z + math.expm1(-z)) / abs(x) ** (2 * al)

    def piece(f, a, b):
        return integrate.quad(f, a, b, limit=500, epsabs=0, epsrel=1e-11)[0]

    @lru_cache(None)
    def Q(u):
        f = lambda x: g(x) * g(u - x)
        tot = piece(f, 0, u / 2) + piece(f, u / 2, u)
        for a, b in [(0, 1), (1, 100), (100, 1e4), (1e4, 1e6), (1e6, 1e8)]:
            tot += piece(lambda s: f(-s), a, b) + piece(lambda s: f(u + s), a, b)
        return tot + 2 * (2 * T) ** 2 * 1e8 ** (1 - 2 * al) / (2 * al - 1)

    F = lambda u: (2 - 2 * math.cos(u)) / u ** 2 * Q(u) if u > 1e-6 else Q(u)
    total = sum(integrate.quad(F, a, b, limit=500, epsrel=1e-10)[0]
                for a, b in [(0, 1), (1, 10), (10, 100), (100, 400)])
    total += integrate.quad(lambda u: 2 * Q(u) / u ** 2, 400, np.inf, limit=200)[0]
    return 2 * total / (2 * math.pi) ** 2


def test_l2_norm_against_nested_quadpack():
    val, err = ilt_l2_norm(StepFunction.indicator(0.0, 1.0), 1.0, 0.75, return_error=True)
    ref = _quadpack_l2(1.0, 0.75)
    assert err < 1e-4 * val
    assert val == pytest.approx(ref, rel=1e-4)


def test_l2_norm_scaling_and_zero():
    psi = StepFunction.indicator(0.0, 1.0)
    a = ilt_l2_norm(psi, 1.0, 0.75)
    assert ilt_l2_norm(psi.scaled(3.0), 1.0, 0.75) == pytest.approx(9 * a, rel=1e-6)
    # translation invariance of the start-integrated moment
    assert ilt_l2_norm(StepFunction.indicator(2.0, 3.0), 1.0, 0.75) == pytest.approx(a, rel=1e-6)
    assert ilt_l2_norm(StepFunction(), 1.0, 0.75) == 0.0


def test_mollification_error_decreases_and_moment_converges():
    psi = StepFunction.indicator(0.0, 1.0)
    l2 = ilt_l2_norm(psi, 1.0, 0.75)
    errs, moms = [], []
    for eps in (0.5, 0.1, 0.02):
        spec = MollifierSpec(eps)
        errs.append(ilt_mollification_error(psi, 1.0, 0.75, spec))
        moms.append(ilt_mollified_moment(psi, 1.0, 0.75, spec))
    assert errs[0] > errs[1] > errs[2] > 0
    gaps = [abs(m - l2) for m in moms]
    assert gaps[0] > gaps[1] > gaps[2]
    assert all(m < l2 for m in moms)


def test_ilt_pair_constant_paths():
    n, dt = 20, 0.05
    spec = MollifierSpec(0.5)
    pair = PathPair(dt, np.full(n, 0.3), np.full(n, 0.5))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        v = ilt_pair(pair, StepFunction.indicator(0.0, 1.0), spec)
    assert v.value == pytest.approx((n * dt) ** 2 * spec(0.2), rel=1e-12)
    assert ilt_pair(pair, StepFunction.indicator(0.5, 1.0), spec).value == 0.0


def test_ilt_pair_brute_force_and_warning():
    rng = np.random.default_rng(0)
    e1 = np.cumsum(rng.normal(0, 0.05, 200))
    e2 = 0.1 + np.cumsum(rng.normal(0, 0.05, 200))
    spec = MollifierSpec(0.2)
    psi = StepFunction.indicator(-0.2, 0.4)
    brute = 0.01 ** 2 * np.sum(spec(e2[None, :] - e1[:, None]) * psi(e1)[:, None])
    assert ilt_pair(PathPair(0.01, e1, e2), psi, spec).value == pytest.approx(brute, rel=1e-12)
    with pytest.warns(RuntimeWarning, match="under-resolved"):
        res = ilt_pair(PathPair(0.01, e1, e2), psi, MollifierSpec(0.01))
    assert res.warning


def test_path_pair_structure():
    t = np.linspace(0, 1, 5)
    p = SamplePath(t, np.zeros(5))
    q = SamplePath(np.linspace(0, 2, 5), np.zeros(5))
    assert PathPair.from_paths(p, p).eta1.size == 4
    with pytest.raises(StructuralError):
        PathPair.from_paths(p, q)
    with pytest.raises(StructuralError):
        PathPair(0.1, np.zeros(3), np.zeros(4))

"""Estimators and test utilities shared by the verification suites."""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _st

from .errors import InsufficientDataError, SpecificationError, StructuralError

__all__ = [
    "Ensemble",
    "EstimateWithError",
    "empirical_covariance",
    "covariance_matrix_estimate",
    "k_statistics",
    "scaling_exponent",
    "shape_correlation",
    "ks_two_sample",
    "mean_with_error",
]


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    n: int

    def within(self, target, nsigma=3.0):
        """|value − target| ≤ nsigma·stderr (exact equality when stderr is 0)."""
        return abs(self.value - target) <= nsigma * self.stderr + 1e-12 * max(1.0, abs(target))

    def as_dict(self):
        return {"value": self.value, "stderr": self.stderr, "n": self.n}


@dataclass
class Ensemble:
    """Replica-by-time matrix of path values."""

    values: np.ndarray
    t_grid: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.t_grid.size:
            raise StructuralError(
                f"ensemble matrix {self.values.shape} does not match a grid of {self.t_grid.size} points")

    @property
    def replicas(self):
        return self.values.shape[0]


def mean_with_error(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("need at least two samples for a standard error")
    return EstimateWithError(float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size)), x.size)


def empirical_covariance(ens, i, j, min_replicas=30):
    """Unbiased sample covariance of columns i, j with jackknife standard error."""
    n = ens.replicas
    if n < min_replicas:
        raise InsufficientDataError(f"covariance needs at least {min_replicas} replicas, got {n}")
    x = ens.values[:, i]
    y = ens.values[:, j]
    dx = x - x.mean()
    dy = y - y.mean()
    c = float(np.dot(dx, dy) / (n - 1))
    # leave-one-out covariances in closed form
    sx, sy, sxy = x.sum(), y.sum(), np.dot(x, y)
    mx = (sx - x) / (n - 1)
    my = (sy - y) / (n - 1)
    loo = ((sxy - x * y) - (n - 1) * mx * my) / (n - 2)
    se = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return EstimateWithError(c, se, n)


def covariance_matrix_estimate(ens):
    """(matrix, stderr matrix) over all column pairs."""
    m = ens.values.shape[1]
    cov = np.empty((m, m))
    se = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            e = empirical_covariance(ens, i, j)
            cov[i, j] = cov[j, i] = e.value
            se[i, j] = se[j, i] = e.stderr
    return cov, se


def k_statistics(samples, k, resamples=500, seed=0):
    """Unbiased k-statistic of order k ≤ 4 with a bootstrap standard error."""
    x = np.asarray(samples, dtype=float).ravel()
    if k not in (1, 2, 3, 4):
        raise SpecificationError(f"k-statistics are available for orders 1..4, got {k}")
    if x.size < 10 * 2 ** k:
        raise InsufficientDataError(f"order {k} needs at least {10 * 2 ** k} samples, got {x.size}")
    value = float(_st.kstat(x, k))
    if np.all(x == x[0]):
        return EstimateWithError(0.0 if k > 1 else value, 0.0, x.size)
    rng = np.random.default_rng(seed)
    boot = np.empty(resamples)
    for b in range(resamples):
        boot[b] = _st.kstat(x[rng.integers(0, x.size, x.size)], k)
    return EstimateWithError(value, float(boot.std(ddof=1)), x.size)


def scaling_exponent(ens, lags):
    """Slope of log Var(ξ_t) against log t over the given grid points.

    Standard error combines the regression residuals with the sampling
    error of each log-variance (≈ √((κ₄/σ⁴ + 2)/n)).
    """
    lags = np.asarray(lags, dtype=float)
    if lags.size < 3:
        raise SpecificationError("scaling fit needs at least three lags")
    if lags.max() / lags.min() < 10.0 - 1e-9:
        raise SpecificationError("lags must span at least one decade")
    cols = [int(np.argmin(np.abs(ens.t_grid - t))) for t in lags]
    if not np.allclose(ens.t_grid[cols], lags, rtol=1e-9, atol=1e-12):
        raise SpecificationError("lags must be points of the ensemble time grid")
    v = ens.values[:, cols]
    var = v.var(axis=0, ddof=1)
    if np.any(var <= 0):
        raise SpecificationError("degenerate lag set: zero variance")
    lx, ly = np.log(lags), np.log(var)
    fit = _st.linregress(lx, ly)
    n = ens.replicas
    kurt = _st.kurtosis(v, axis=0)
    sd_ly = np.sqrt((kurt + 2.0) / n)
    w = (lx - lx.mean()) / np.sum((lx - lx.mean()) ** 2)
    se_sampling = float(np.sqrt(np.sum((w * sd_ly) ** 2)))
    se = float(np.hypot(fit.stderr if lags.size > 2 else 0.0, se_sampling))
    return EstimateWithError(float(fit.slope), se, n)


def shape_correlation(emp, target):
    """Pearson correlation of upper-triangle entries and fitted scale ⟨E,T⟩/⟨T,T⟩."""
    emp = np.asarray(emp, dtype=float)
    target = np.asarray(target, dtype=float)
    if emp.shape != target.shape or emp.ndim != 2 or emp.shape[0] != emp.shape[1]:
        raise StructuralError(f"matrices must be square and equal-sized, got {emp.shape} and {target.shape}")
    tt = np.sum(target * target)
    if tt == 0:
        raise SpecificationError("target matrix is identically zero")
    scale = float(np.sum(emp * target) / tt)
    iu = np.triu_indices(emp.shape[0])
    a, b = emp[iu], target[iu]
    if a.std() == 0 or b.std() == 0:
        corr = 1.0 if np.allclose(a / max(abs(a).max(), 1e-300), b / abs(b).max()) else 0.0
    else:
        corr = float(np.corrcoef(a, b)[0, 1])
    return corr, scale


def ks_two_sample(x, y, min_size=50):
    """Two-sample KS test with the asymptotic distribution."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if min(x.size, y.size) < min_size:
        raise InsufficientDataError(f"KS test needs at least {min_size} samples per ensemble")
    res = _st.ks_2samp(x, y, method="asymp")
    return {"statistic": float(res.statistic), "pvalue": float(res.pvalue), "n1": x.size, "n2": y.size}

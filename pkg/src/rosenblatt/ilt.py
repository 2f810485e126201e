"""Mollified intersection local time of two paths and its L² oracles.

The pathwise functional is the tensor Riemann sum

    Λ_ε(η¹, η²; ψ) = Δ² Σ_u Σ_v f_ε(η²_v − η¹_u) ψ(η¹_u)

and the oracles are Fourier-side double integrals of the form
(2π)⁻² ∬ |ψ̂(x+y)|² m(x, y) g_T(x) g_T(y) dx dy, evaluated with
:func:`rosenblatt.quadrature.fourier_pair_integral`.
"""

import functools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import levy_stable

from .errors import ParameterError, SpecificationError, StructuralError
from .quadrature import fourier_pair_integral
from .sampling import RngStream, stable_variates

__all__ = [
    "MollifierSpec",
    "StepFunction",
    "PathPair",
    "ILTValue",
    "mollifier_eval",
    "ilt_pair",
    "time_kernel_gT",
    "discrete_time_kernel",
    "ilt_l2_norm",
    "ilt_mollification_error",
    "ilt_mollified_moment",
    "ilt_integrated_moment_mc",
    "check_alpha",
]

# below this value of T|x|^α the closed form of g_T loses digits to
# cancellation and a Taylor series is used instead
_SERIES_CUT = 1e-3


def check_alpha(alpha):
    """Reject α outside (1/2, 1); the ILT only exists for α > 1/2."""
    alpha = float(alpha)
    if not 0.5 < alpha < 1.0:
        raise ParameterError(
            f"alpha={alpha} is outside (1/2, 1); the intersection local time "
            "of two stable paths requires alpha > 1/2"
        )
    return alpha


# ---------------------------------------------------------------------------
# mollifier


_SHAPES = {
    "bump": lambda x: np.exp(-1.0 / (1.0 - x * x)),
    "bump4": lambda x: np.exp(-1.0 / (1.0 - x ** 4)),
}

_FT_MAX = 2500.0
_FT_STEP = 0.05
_SERIES_OMEGA = 0.1


@functools.lru_cache(maxsize=None)
def _shape_tables(shape):
    raw = _SHAPES[shape]
    # the bump is flat to all orders at ±1, so Gauss-Legendre converges fast
    x, w = np.polynomial.legendre.leggauss(2400)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    fx = raw(x)
    mass = 2.0 * np.dot(w, fx)
    omega = np.arange(0.0, _FT_MAX + _FT_STEP, _FT_STEP)
    ft = np.empty_like(omega)
    for i in range(0, omega.size, 2000):
        ft[i:i + 2000] = 2.0 * (np.cos(np.outer(omega[i:i + 2000], x)) @ (w * fx)) / mass
    return mass, CubicSpline(omega, ft)


@functools.lru_cache(maxsize=None)
def _shape_moments(shape):
    """Even moments ∫ x^{2k} f(x) dx, k = 1..4, of the unit-mass bump."""
    x, w = np.polynomial.legendre.leggauss(2400)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w * _SHAPES[shape](x)
    mass = 2.0 * w.sum()
    return tuple(2.0 * np.dot(w, x ** (2 * k)) / mass for k in range(1, 5))


@dataclass(frozen=True)
class MollifierSpec:
    """Symmetric smooth bump f on [−1, 1] with unit mass, scaled by ε.

    ``shape`` selects the base bump: ``"bump"`` is exp(−1/(1−x²)),
    ``"bump4"`` is exp(−1/(1−x⁴)).  Both are normalised numerically.
    """

    epsilon: float
    shape: str = "bump"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"mollifier scale must be positive, got {self.epsilon}")
        if self.shape not in _SHAPES:
            raise ParameterError(f"unknown bump shape {self.shape!r}; choose from {sorted(_SHAPES)}")

    def base(self, x):
        """Unit-mass base bump f(x)."""
        x = np.asarray(x, dtype=float)
        mass, _ = _shape_tables(self.shape)
        inside = np.abs(x) < 1.0
        xi = np.where(inside, x, 0.0)
        return np.where(inside, _SHAPES[self.shape](xi) / mass, 0.0)

    def __call__(self, x):
        return self.base(np.asarray(x, dtype=float) / self.epsilon) / self.epsilon

    def fourier_base(self, omega):
        """f̂(ω) = ∫ f(x) e^{iωx} dx (real, even)."""
        omega = np.abs(np.asarray(omega, dtype=float))
        _, spline = _shape_tables(self.shape)
        return np.where(omega < _FT_MAX, spline(np.minimum(omega, _FT_MAX)), 0.0)

    def fourier(self, y):
        """f̂_ε(y) = f̂(εy)."""
        return self.fourier_base(self.epsilon * np.asarray(y, dtype=float))

    def fourier_defect(self, y):
        """1 − f̂(εy) without cancellation at small εy (moment series there)."""
        omega = np.abs(self.epsilon * np.asarray(y, dtype=float))
        w = np.minimum(omega, _SERIES_OMEGA)
        m = _shape_moments(self.shape)
        w2 = w * w
        series = w2 * (m[0] / 2 - w2 * (m[1] / 24 - w2 * (m[2] / 720 - w2 * m[3] / 40320)))
        return np.where(omega < _SERIES_OMEGA, series, 1.0 - self.fourier_base(omega))


def mollifier_eval(spec, x):
    """Value of f_ε at x (scalar or array); zero outside [−ε, ε]."""
    return spec(x)


# ---------------------------------------------------------------------------
# step functions


@dataclass(frozen=True)
class StepFunction:
    """ψ(x) = Σ a_j 1_{(lo_j, hi_j]}(x) with bounded intervals."""

    pieces: tuple = field(default_factory=tuple)

    def __post_init__(self):
        clean = []
        for a, (lo, hi) in self.pieces:
            lo, hi, a = float(lo), float(hi), float(a)
            if not (np.isfinite(lo) and np.isfinite(hi) and np.isfinite(a)) or hi < lo:
                raise SpecificationError(f"invalid step-function piece {a}·1({lo}, {hi}]")
            if hi > lo and a != 0.0:
                clean.append((a, (lo, hi)))
        object.__setattr__(self, "pieces", tuple(clean))

    @classmethod
    def indicator(cls, a, b, coef=1.0):
        return cls(((coef, (a, b)),))

    @classmethod
    def test_function(cls, t, variant="standard"):
        """1_{[0,t]} or, for the sub variant, 1_{[0,t]} − 1_{[−t,0]}."""
        if variant == "standard":
            return cls(((1.0, (0.0, t)),))
        if variant == "sub":
            return cls(((1.0, (0.0, t)), (-1.0, (-t, 0.0))))
        raise SpecificationError(f"unknown variant {variant!r}")

    @classmethod
    def increment(cls, t1, t2, variant="standard"):
        """Test function of ξ_{t2} − ξ_{t1}."""
        if variant == "standard":
            return cls(((1.0, (t1, t2)),))
        return cls(((1.0, (t1, t2)), (-1.0, (-t2, -t1))))

    def scaled(self, c):
        return StepFunction(tuple((c * a, iv) for a, iv in self.pieces))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, (lo, hi) in self.pieces:
            out += a * ((x > lo) & (x <= hi))
        return out

    @property
    def is_zero(self):
        return not self.pieces

    @property
    def hull(self):
        if self.is_zero:
            return (0.0, 0.0)
        return (min(lo for _, (lo, _) in self.pieces), max(hi for _, (_, hi) in self.pieces))

    @property
    def span(self):
        lo, hi = self.hull
        return hi - lo

    def jumps(self):
        """Distinct breakpoints b_p with jump sizes c_p (ψ̂ = Σ c_p e^{ib_p u}/(iu))."""
        acc = {}
        for a, (lo, hi) in self.pieces:
            acc[hi] = acc.get(hi, 0.0) + a
            acc[lo] = acc.get(lo, 0.0) - a
        return {b: c for b, c in acc.items() if c != 0.0}

    def fourier(self, u):
        """ψ̂(u) = ∫ ψ(x) e^{iux} dx, exact per piece and stable at u = 0."""
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape, dtype=complex)
        for a, (lo, hi) in self.pieces:
            w = hi - lo
            out += a * w * np.sinc(u * w / (2 * np.pi)) * np.exp(0.5j * u * (lo + hi))
        return out

    def fourier_sq(self, u):
        return np.abs(self.fourier(u)) ** 2

    def fourier_sq_mean(self, u):
        """Non-oscillating part Σ c_p² / u² of |ψ̂(u)|²."""
        c2 = sum(c * c for c in self.jumps().values())
        return c2 / np.asarray(u, dtype=float) ** 2


# ---------------------------------------------------------------------------
# pathwise functional


@dataclass(frozen=True)
class PathPair:
    """Two paths sampled on a common uniform grid of step Δ."""

    dt: float
    eta1: np.ndarray
    eta2: np.ndarray

    def __post_init__(self):
        e1 = np.asarray(self.eta1, dtype=float)
        e2 = np.asarray(self.eta2, dtype=float)
        if not self.dt > 0:
            raise StructuralError(f"grid step must be positive, got {self.dt}")
        if e1.ndim != 1 or e1.shape != e2.shape:
            raise StructuralError(f"paths must share a grid, got shapes {e1.shape} and {e2.shape}")
        object.__setattr__(self, "eta1", e1)
        object.__setattr__(self, "eta2", e2)

    @classmethod
    def from_paths(cls, p1, p2):
        """Build from two SamplePath-like objects with ``times``/``values``."""
        t1 = np.asarray(p1.times, dtype=float)
        t2 = np.asarray(p2.times, dtype=float)
        if t1.shape != t2.shape or not np.array_equal(t1, t2):
            raise StructuralError("paths are sampled on different time grids")
        steps = np.diff(t1)
        if steps.size == 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise StructuralError("ILT needs a uniform time grid with at least two points")
        # left-endpoint Riemann sum over [t0, t_end)
        return cls(float(steps[0]), np.asarray(p1.values)[:-1], np.asarray(p2.values)[:-1])


@dataclass(frozen=True)
class ILTValue:
    value: float
    increment_scale: float
    epsilon: float
    warning: str = ""

    def __float__(self):
        return self.value


def _window_sum(centres, weights_c, points, fn, eps):
    """Σ_c weights_c Σ_p fn(points_p − centres_c) restricted to |·| < eps."""
    pts = np.sort(points)
    lo = np.searchsorted(pts, centres - eps, side="right")
    hi = np.searchsorted(pts, centres + eps, side="left")
    cnt = hi - lo
    total = int(cnt.sum())
    if total == 0:
        return 0.0
    owner = np.repeat(np.arange(centres.size), cnt)
    start = np.repeat(lo - np.concatenate(([0], np.cumsum(cnt)[:-1])), cnt)
    idx = start + np.arange(total)
    vals = fn(pts[idx] - centres[owner])
    return float(np.dot(np.bincount(owner, vals, minlength=centres.size), weights_c))


def ilt_pair(pair, psi, spec):
    """Δ² Σ_u Σ_v f_ε(η²_v − η¹_u) ψ(η¹_u) on the pair's common grid.

    Returns an :class:`ILTValue`; ``warning`` is set when ε is below twice
    the median single-step displacement, where the Riemann sum is not
    resolved.
    """
    e1, e2 = pair.eta1, pair.eta2
    inc = np.abs(np.diff(np.concatenate([e1, e2])))
    scale = float(np.median(inc)) if inc.size else 0.0
    note = ""
    if spec.epsilon < 2.0 * scale:
        note = (f"epsilon={spec.epsilon:g} is below twice the median path increment "
                f"{scale:.3g}; the Riemann sum is under-resolved")
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    w = psi(e1)
    keep = w != 0.0
    value = _window_sum(e1[keep], w[keep], e2, spec, spec.epsilon) * pair.dt ** 2
    return ILTValue(value, scale, spec.epsilon, note)


# ---------------------------------------------------------------------------
# time kernels


def time_kernel_gT(x, T, alpha):
    """g_T(x) = ∫_{[0,T]²} e^{−|s−u||x|^α} ds du = 2(Ta − 1 + e^{−Ta})/a², a = |x|^α."""
    x = np.asarray(x, dtype=float)
    a = np.abs(x) ** alpha
    z = T * a
    small = z < _SERIES_CUT
    zs = np.where(small, z, 0.0)
    series = T * T * (1.0 - zs / 3.0 + zs * zs / 12.0 - zs ** 3 / 60.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = 2.0 * (z + np.expm1(-z)) / (a * a)
    return np.where(small, series, closed)


def discrete_time_kernel(x, T, alpha, dt):
    """Grid analogue dt² Σ_{k,l<n} e^{−|k−l| dt |x|^α} of g_T, n = T/dt."""
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise ParameterError(f"T={T} is not a multiple of dt={dt}")
    x = np.asarray(x, dtype=float)
    r = dt * np.abs(x) ** alpha
    q = np.exp(-r)
    one_q = -np.expm1(-r)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        geo = n + 2.0 * (q * (n - 1) - n * q * q + q ** (n + 1)) / (one_q * one_q)
    # Taylor series in r with moments Σ_{k,l}|k−l|^m where the closed form cancels
    d = np.arange(1, n, dtype=float)
    series = np.zeros_like(r) + float(n) * n
    term = np.ones_like(r)
    for m in range(1, 8):
        term = term * (-r) / m
        series = series + term * (2.0 * np.sum((n - d) * d ** m))
    return dt * dt * np.where(n * r > 0.05, geo, series)


# ---------------------------------------------------------------------------
# L² oracles


def _kernel(T, alpha, spec=None, mode="l2", dt=None):
    if dt is None:
        g = functools.partial(time_kernel_gT, T=T, alpha=alpha)
    else:
        g = functools.partial(discrete_time_kernel, T=T, alpha=alpha, dt=dt)

    def k(x, y):
        base = g(x) * g(y)
        if mode == "l2":
            return base
        if mode == "error":
            return base * spec.fourier_defect(y) ** 2
        fy = spec.fourier(y)
        return base * fy * fy

    return k


def _oracle(psi, T, alpha, kernel, rtol):
    check_alpha(alpha)
    if not T > 0:
        raise ParameterError(f"horizon T must be positive, got {T}")
    if psi.is_zero:
        return 0.0, 0.0
    val, err = fourier_pair_integral(psi, kernel, rtol=rtol)
    return val / (2 * np.pi) ** 2, err / (2 * np.pi) ** 2


def ilt_l2_norm(psi, T, alpha, rtol=1e-4, return_error=False):
    """(2π)⁻² ∬ |ψ̂(x+y)|² g_T(x) g_T(y) dx dy.

    Equals the start-integrated second moment E∬⟨Λ(x+ρ¹, y+ρ²; T), ψ⟩² dx dy.
    """
    val, err = _oracle(psi, T, alpha, _kernel(T, alpha), rtol)
    return (val, err) if return_error else val


def ilt_mollification_error(psi, T, alpha, spec, rtol=1e-4, return_error=False):
    """(2π)⁻² ∬ |ψ̂(x+y)|² |f̂(εy) − 1|² g_T(x) g_T(y) dx dy."""
    val, err = _oracle(psi, T, alpha, _kernel(T, alpha, spec, "error"), rtol)
    return (val, err) if return_error else val


def ilt_mollified_moment(psi, T, alpha, spec, dt=None, rtol=1e-4, return_error=False):
    """(2π)⁻² ∬ |ψ̂(x+y)|² f̂(εy)² G(x) G(y) dx dy.

    The start-integrated second moment of the mollified functional itself,
    with G = g_T in continuous time or the grid kernel when ``dt`` is given.
    """
    val, err = _oracle(psi, T, alpha, _kernel(T, alpha, spec, "mollified", dt), rtol)
    return (val, err) if return_error else val


def ilt_integrated_moment_mc(psi, T, alpha, spec, dt, pairs, per_pair=4, seed=0):
    """Monte Carlo estimate of E∬ ilt_pair(x + ρ¹, y + ρ²; ψ)² dx dy.

    For each pair of grid stable paths the start offset x is uniform on the
    range where ψ(x + ρ¹) can be non-zero and the separation d = y − x is
    drawn from the mixture of windows |d − (ρ¹_u − ρ²_v)| < ε over all grid
    pairs (u, v), which covers the support of the integrand exactly; the
    weights undo both densities.  Returns (mean, standard error) with one
    averaged value per path pair as the sampling unit.
    """
    from .stats import mean_with_error

    alpha = check_alpha(alpha)
    n = int(round(T / dt))
    if n < 2 or abs(n * dt - T) > 1e-9 * T:
        raise ParameterError(f"T={T} must be a multiple of dt={dt} with at least two steps")
    if psi.is_zero:
        return mean_with_error(np.zeros(2))
    a, b = psi.hull
    eps = spec.epsilon
    scale = dt ** (1.0 / alpha)
    # resolution is a property of dt, not of individual short paths
    med = scale * float(levy_stable.ppf(0.75, alpha, 0.0))
    if eps < 2.0 * med:
        warnings.warn(f"epsilon={eps:g} is below twice the median step {med:.3g}; "
                      "the Riemann sum is under-resolved", RuntimeWarning, stacklevel=2)
    out = np.empty(int(pairs))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for p in range(out.size):
            out[p] = _mc_pair(psi, spec, RngStream(seed, p).generator(), alpha, n, dt, scale, a, b, per_pair)
    return mean_with_error(out)


def _mc_pair(psi, spec, rng, alpha, n, dt, scale, a, b, per_pair):
    """Average weighted squared ILT over ``per_pair`` offsets of one path pair."""
    eps = spec.epsilon
    r1 = np.concatenate([[0.0], np.cumsum(scale * stable_variates(alpha, n - 1, rng))])
    r2 = np.concatenate([[0.0], np.cumsum(scale * stable_variates(alpha, n - 1, rng))])
    lo, width = a - r1.max(), (b - a) + (r1.max() - r1.min())
    s2 = np.sort(r2)
    acc = 0.0
    for _ in range(per_pair):
        x = lo + width * rng.random()
        d = r1[rng.integers(n)] - r2[rng.integers(n)] + eps * (2.0 * rng.random() - 1.0)
        hits = np.searchsorted(s2, r1 - d + eps, "left") - np.searchsorted(s2, r1 - d - eps, "right")
        count = hits.sum()
        if count == 0:
            # d sits exactly on a window edge, where f_ε vanishes
            continue
        f = ilt_pair(PathPair(dt, x + r1, x + d + r2), psi, spec).value
        acc += width * f * f * (n * n * 2.0 * eps) / count
    return acc / per_pair

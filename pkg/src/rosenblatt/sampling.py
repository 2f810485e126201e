"""Seedable random generation: stable increments, stationary Gaussian
sequences, Poisson fields and ±1 charges.

Every generator takes an :class:`RngStream`.  A stream is a pure key
(seed, stream_id, sub-keys); the numpy generator is rebuilt from the key
each time, so outputs depend only on the key and never on call order or
worker count.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SpectralValidityError

__all__ = [
    "RngStream",
    "GaussianStationarySpec",
    "PoissonField",
    "stable_variates",
    "stable_increments",
    "gaussian_stationary_sequence",
    "circulant_eigenvalues",
    "poisson_field",
    "rademacher_charges",
]

_CLAMP_TOL = 1e-10
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Key of an independent random stream.

    ``child(k)`` derives a sub-stream; distinct keys give statistically
    independent generators through numpy's SeedSequence spawn keys.
    """

    seed: int
    stream_id: int = 0
    keys: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def generator(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,) + tuple(self.keys))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys):
        return RngStream(self.seed, self.stream_id, self.keys + tuple(int(k) for k in keys))


def _count(n, name="n"):
    n = int(n)
    if n < 0:
        raise ParameterError(f"{name} must be non-negative, got {n}")
    return n


def stable_variates(alpha, size, rng):
    """Symmetric α-stable variates with E e^{izX} = e^{−|z|^α}.

    Chambers-Mallows-Stuck transform of a uniform angle and a unit
    exponential; exact for every α in (0, 2].
    """
    v = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        return np.tan(v)
    return (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


def stable_increments(alpha, dt, n, stream):
    """n i.i.d. increments with characteristic function e^{−dt|z|^α}."""
    alpha = float(alpha)
    if not 0.0 < alpha <= 2.0:
        raise ParameterError(f"stable index must lie in (0, 2], got {alpha}")
    if not dt > 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    n = _count(n)
    return dt ** (1.0 / alpha) * stable_variates(alpha, n, stream.generator())


@dataclass(frozen=True)
class GaussianStationarySpec:
    """Covariances r[0..n−1] of a stationary sequence of length n."""

    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 1 or r.size < 1:
            raise ParameterError("covariance sequence must be a non-empty vector")
        object.__setattr__(self, "r", r)

    @property
    def n(self):
        return self.r.size

    @classmethod
    def donsker(cls, H, n):
        """r_j = (1 + j²)^{(H−1)/2}, j = 0..n−1."""
        j = np.arange(int(n), dtype=float)
        return cls((1.0 + j * j) ** ((H - 1.0) / 2.0))


def circulant_eigenvalues(r):
    """Eigenvalues of the minimal circulant embedding of size 2(n−1)."""
    r = np.asarray(r, dtype=float)
    c = np.concatenate([r, r[-2:0:-1]])
    return np.fft.rfft(c).real, c.size


def gaussian_stationary_sequence(spec, stream, size=None):
    """Centred Gaussian vector(s) with Cov(Y_i, Y_j) = r[|i−j|].

    Circulant embedding: negative eigenvalues no larger than 1e-10 of the
    largest are clamped to zero, larger ones raise SpectralValidityError.
    With ``size`` given, returns an array of shape (size, n).
    """
    rng = stream.generator()
    n = spec.n
    rows = 1 if size is None else _count(size, "size")
    if n == 1:
        out = np.sqrt(spec.r[0]) * rng.standard_normal((rows, 1))
        return out[0] if size is None else out
    lam, m = circulant_eigenvalues(spec.r)
    worst = lam.min()
    if worst < -_CLAMP_TOL * lam.max():
        raise SpectralValidityError(
            f"circulant embedding is indefinite: eigenvalue {worst:.3e} "
            f"(largest {lam.max():.3e})", worst)
    lam = np.clip(lam, 0.0, None)
    full = np.concatenate([lam, lam[-2:0:-1]])
    scale = np.sqrt(full / m)
    out = np.empty((rows, n))
    # real and imaginary parts of one transform are independent draws
    for i in range(0, rows, 2):
        z = rng.standard_normal((2, m))
        y = np.fft.fft(scale * (z[0] + 1j * z[1]))
        out[i] = y.real[:n]
        if i + 1 < rows:
            out[i + 1] = y.imag[:n]
    return out[0] if size is None else out


@dataclass(frozen=True)
class PoissonField:
    points: np.ndarray
    L: float
    intensity: float = 1.0

    @property
    def count(self):
        return self.points.size


def poisson_field(intensity, L, stream):
    """Poisson(2L·intensity) points, i.i.d. uniform on [−L, L]."""
    if not intensity > 0:
        raise ParameterError(f"intensity must be positive, got {intensity}")
    if not L > 0:
        raise ParameterError(f"window half-width must be positive, got {L}")
    rng = stream.generator()
    n = rng.poisson(2.0 * L * intensity)
    return PoissonField(rng.uniform(-L, L, n), float(L), float(intensity))


def rademacher_charges(n, stream):
    """n i.i.d. charges uniform on {−1, +1}."""
    n = _count(n)
    return 2 * stream.generator().integers(0, 2, n) - 1

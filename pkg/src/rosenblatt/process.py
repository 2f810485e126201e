"""Direct generators for the Rosenblatt and sub-Rosenblatt processes.

Two constructions are provided:

* ``donsker``: normalised partial sums of H₂(Y_j) = Y_j² − 1 for a
  stationary Gaussian sequence with r_j = (1 + j²)^{(H−1)/2}.
* ``spectral``: a discretised double Wiener-Itô integral
  A(H) Σ K_t(λ_i + λ_j) |λ_i λ_j|^{−H/2} B̃_i B̃_j over a hybrid
  log/linear frequency grid.

Both are normalised so that E ξ₁² = 1.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .cumulants import check_H, sigma_of_H
from .errors import ParameterError, ResourceError, SpecificationError, StructuralError
from .sampling import GaussianStationarySpec, RngStream, gaussian_stationary_sequence

__all__ = [
    "SamplePath",
    "SpectralGridSpec",
    "rosenblatt_covariance",
    "covariance_matrix",
    "spectral_constant",
    "donsker_path",
    "donsker_ensemble",
    "donsker_prelimit_variance",
    "spectral_path",
    "spectral_ensemble",
    "spectral_discrete_covariance",
    "selfsimilarity_check",
    "write_paths_csv",
    "read_paths_csv",
]

VARIANTS = ("standard", "sub")
_DONSKER_MAX = 1 << 22
_CHUNK = 64


def _variant(variant):
    if variant not in VARIANTS:
        raise SpecificationError(f"unknown covariance variant {variant!r}; use 'standard' or 'sub'")
    return variant


@dataclass
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise StructuralError("times and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.times) <= 0):
            raise StructuralError("times must be strictly increasing")


def _grid(t_grid, lo=0.0, hi=np.inf):
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0:
        raise SpecificationError("time grid is empty")
    if np.any(np.diff(t) <= 0) or t[0] < lo or t[-1] > hi or not np.all(np.isfinite(t)):
        raise SpecificationError(f"time grid must be strictly increasing within [{lo}, {hi}]")
    return t


# ---------------------------------------------------------------------------
# covariance


def rosenblatt_covariance(s, t, H, variant="standard"):
    """E ξ_s ξ_t under E ξ₁² = 1 (fBm form, or sub-fBm form for ``sub``)."""
    H = check_H(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h2 = 2.0 * H
    if _variant(variant) == "standard":
        return 0.5 * (s ** h2 + t ** h2 - np.abs(t - s) ** h2)
    return s ** h2 + t ** h2 - 0.5 * (np.abs(t - s) ** h2 + (t + s) ** h2)


def covariance_matrix(times, H, variant="standard"):
    t = np.asarray(times, dtype=float)
    return rosenblatt_covariance(t[:, None], t[None, :], H, variant)


# ---------------------------------------------------------------------------
# Donsker scheme


def donsker_prelimit_variance(H, n, t=1.0):
    """Exact Var ξ_n(t) of the pre-limit sum (σ²/n^{2H}) Var Σ_{j≤⌊nt⌋} H₂(Y_j)."""
    m = int(math.floor(n * t + 1e-9))
    if m == 0:
        return 0.0
    k = np.arange(1, m, dtype=float)
    r2 = (1.0 + k * k) ** (H - 1.0)
    var_sum = 2.0 * (m + 2.0 * np.sum((m - k) * r2))
    return sigma_of_H(H) ** 2 * var_sum / float(n) ** (2 * H)


def donsker_ensemble(H, n, t_grid, seed, paths, first_id=0, rescale=False):
    """Matrix (paths × len(t_grid)) of Donsker pre-limit values.

    Path ``i`` uses stream (seed, first_id + i).  With ``rescale`` the
    values are divided by the exact pre-limit standard deviation at t = 1.
    """
    H = check_H(H)
    n = int(n)
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    if n > _DONSKER_MAX:
        raise ResourceError(f"n={n} exceeds the circulant-embedding limit {_DONSKER_MAX}")
    t = _grid(t_grid, 0.0, 1.0)
    idx = np.floor(n * t + 1e-9).astype(int)
    spec = GaussianStationarySpec.donsker(H, n)
    scale = sigma_of_H(H) / float(n) ** H
    if rescale:
        scale /= math.sqrt(donsker_prelimit_variance(H, n))
    out = np.empty((int(paths), t.size))
    for i in range(int(paths)):
        y = gaussian_stationary_sequence(spec, RngStream(seed, first_id + i))
        csum = np.concatenate([[0.0], np.cumsum(y * y - 1.0)])
        out[i] = scale * csum[idx]
    return out


def donsker_path(H, n, t_grid, stream, rescale=False):
    """One Donsker pre-limit path ξ_n(t) = (σ/n^H) Σ_{j≤⌊nt⌋}(Y_j² − 1)."""
    vals = donsker_ensemble(H, n, t_grid, stream.seed, 1, stream.stream_id, rescale)[0]
    meta = {"generator": "donsker", "H": H, "n": int(n), "seed": stream.seed,
            "stream_id": stream.stream_id, "rescaled": bool(rescale),
            "prelimit_variance_t1": donsker_prelimit_variance(H, n)}
    return SamplePath(t_grid, vals, meta)


# ---------------------------------------------------------------------------
# spectral representation


def spectral_constant(H):
    """A(H) = √(H(2H−1)/2) / (2Γ(1−H) sin(Hπ/2)), giving E ξ₁² = 1."""
    H = check_H(H)
    return math.sqrt(H * (2 * H - 1) / 2) / (2 * special.gamma(1 - H) * math.sin(H * math.pi / 2))


@dataclass(frozen=True)
class SpectralGridSpec:
    """Hybrid frequency grid on each half-axis.

    Cells: [0, lambda_min], ``n_log`` geometric cells up to ``lambda_split``,
    then linear cells of width ``linear_width`` up to ``lambda_max``.  Nodes
    sit at cell midpoints (the half-cell offset keeps λ = 0 off the grid)
    and weights are the exact cell integrals of |λ|^{−H}.

    ``diagonal`` selects how the cells λ_i = ±λ_j enter the double sum:
    ``"wick"`` keeps them Wick-centred, ``"exclude"`` drops them.
    ``tail`` adds an independent Brownian term carrying the variance of the
    frequencies beyond ``lambda_max``.
    """

    lambda_max: float = 100.0
    lambda_min: float = 1e-4
    lambda_split: float = 0.25
    linear_width: float = 0.25
    n_log: int = 20
    offset: bool = True
    diagonal: str = "wick"
    tail: bool = True

    def __post_init__(self):
        if not (0 < self.lambda_min < self.lambda_split < self.lambda_max):
            raise SpecificationError("need 0 < lambda_min < lambda_split < lambda_max")
        if not (self.linear_width > 0 and self.n_log >= 1):
            raise SpecificationError("linear_width must be positive and n_log ≥ 1")
        if not self.offset:
            raise SpecificationError("grid without half-cell offset would contain λ = 0")
        if self.diagonal not in ("wick", "exclude"):
            raise SpecificationError(f"diagonal must be 'wick' or 'exclude', got {self.diagonal!r}")

    def edges(self):
        e_log = np.geomspace(self.lambda_min, self.lambda_split, self.n_log + 1)
        n_lin = int(math.ceil((self.lambda_max - self.lambda_split) / self.linear_width - 1e-9))
        e_lin = np.linspace(self.lambda_split, self.lambda_max, n_lin + 1)
        return np.concatenate([[0.0], e_log, e_lin[1:]])

    def cells(self, H):
        """Positive-axis nodes λ_p and weights W_p = ∫_cell λ^{−H} dλ."""
        e = self.edges()
        return 0.5 * (e[1:] + e[:-1]), (e[1:] ** (1 - H) - e[:-1] ** (1 - H)) / (1 - H)

    @property
    def m(self):
        return self.edges().size - 1

    def tail_rate(self, H):
        """Variance per unit time of the frequencies beyond lambda_max."""
        a = spectral_constant(H)
        return 2 * a * a * 2 * math.pi * 2 * self.lambda_max ** (1 - 2 * H) / (2 * H - 1)


def _kernel(t, u, variant):
    """K_t(u) with the removable point u = 0 filled in."""
    small = np.abs(u * t) < 1e-8
    us = np.where(small, 1.0, u)
    if variant == "standard":
        val = np.expm1(1j * us * t) / (1j * us)
        return np.where(small, t + 0.5j * u * t * t, val)
    val = (2 * np.cos(us * t) - 2) / (1j * us)
    return np.where(small, 1j * u * t * t, val)


def _spectral_kernels(H, t, grid, variant):
    lam, w = grid.cells(H)
    kp = [_kernel(tt, lam[:, None] + lam[None, :], variant) for tt in t]
    km = [_kernel(tt, lam[:, None] - lam[None, :], variant) for tt in t]
    if grid.diagonal == "exclude":
        for a, b in zip(kp, km):
            np.fill_diagonal(a, 0.0)
            np.fill_diagonal(b, 0.0)
    return lam, w, kp, km


def spectral_ensemble(H, t_grid, seed, paths, grid=None, variant="standard", first_id=0):
    """Matrix (paths × len(t_grid)) of spectral-representation values.

    Path ``i`` uses stream (seed, first_id + i).  The cell draws are
    w_p = √(W_p/2)(Z₁ + iZ₂) on the positive axis with B̃(−λ) = conj B̃(λ),
    so ξ_t = 2A Re[wᵀK⁺w + wᵀK⁻w̄] minus its mean.  Sub paths are divided
    by √2 so that their covariance is the sub-fBm form.
    """
    H = check_H(H)
    variant = _variant(variant)
    grid = grid or SpectralGridSpec()
    t = _grid(t_grid)
    a = spectral_constant(H)
    lam, w, kp, km = _spectral_kernels(H, t, grid, variant)
    # Wick centring: E[w_p w̄_q] = W_p δ_pq feeds only the K⁻ diagonal
    mean = np.array([np.sum(np.diag(k).real * w) for k in km]) if grid.diagonal == "wick" else np.zeros(t.size)
    rate = grid.tail_rate(H) if grid.tail else 0.0
    norm = 1.0 / math.sqrt(2.0) if variant == "sub" else 1.0
    paths = int(paths)
    out = np.empty((paths, t.size))
    dt = np.diff(np.concatenate([[0.0], t]))
    sd = np.sqrt(w / 2)
    for c0 in range(0, paths, _CHUNK):
        ids = range(c0, min(paths, c0 + _CHUNK))
        z = np.empty((len(ids), lam.size), dtype=complex)
        bm = np.empty((len(ids), t.size))
        for r, i in enumerate(ids):
            rng = RngStream(seed, first_id + i).generator()
            g = rng.standard_normal((2, lam.size))
            z[r] = sd * (g[0] + 1j * g[1])
            bm[r] = rng.standard_normal(t.size)
        zc = z.conj()
        for j in range(t.size):
            quad = np.sum((z @ kp[j]) * z, axis=1) + np.sum((z @ km[j]) * zc, axis=1)
            out[c0:c0 + len(ids), j] = 2 * a * (quad.real - mean[j]) * norm
        if rate:
            out[c0:c0 + len(ids)] += np.cumsum(bm * np.sqrt(rate * dt), axis=1)
    return out


def spectral_path(H, t_grid, stream, grid=None, variant="standard"):
    """One spectral-representation path on ``t_grid``."""
    vals = spectral_ensemble(H, t_grid, stream.seed, 1, grid, variant, stream.stream_id)[0]
    grid = grid or SpectralGridSpec()
    meta = {"generator": "spectral", "H": H, "variant": variant, "seed": stream.seed,
            "stream_id": stream.stream_id, "cells_per_half_axis": grid.m}
    return SamplePath(t_grid, vals, meta)


def spectral_discrete_covariance(H, t_grid, grid=None, variant="standard"):
    """Exact covariance matrix of the discretised spectral generator.

    Sum over all retained cell pairs of the isometry 2A²|K|²W_iW_j plus the
    Brownian tail term; used to calibrate the grid.
    """
    H = check_H(H)
    grid = grid or SpectralGridSpec()
    t = _grid(t_grid)
    a = spectral_constant(H)
    lam, w, kp, km = _spectral_kernels(H, t, grid, variant)
    ww = w[:, None] * w[None, :]
    cov = np.empty((t.size, t.size))
    for i in range(t.size):
        for j in range(i, t.size):
            # positive/positive and positive/negative blocks each appear twice
            s = np.sum((kp[i] * kp[j].conj()).real * ww) + np.sum((km[i] * km[j].conj()).real * ww)
            cov[i, j] = cov[j, i] = 2 * a * a * 2 * s
    if variant == "sub":
        cov /= 2.0
    if grid.tail:
        cov += grid.tail_rate(H) * np.minimum(t[:, None], t[None, :])
    return cov


# ---------------------------------------------------------------------------
# self-similarity


def selfsimilarity_check(values_ct, values_t, c, H, exponent=None):
    """Two-sample KS comparison of {ξ_{ct}} with {c^H ξ_t}.

    ``exponent`` overrides H in the rescaling (for power checks).
    """
    from .stats import ks_two_sample

    H = check_H(H)
    if not c > 0:
        raise ParameterError(f"scale factor c must be positive, got {c}")
    e = H if exponent is None else exponent
    res = ks_two_sample(np.asarray(values_ct, dtype=float), c ** e * np.asarray(values_t, dtype=float))
    res.update({"c": c, "H": H, "exponent": e})
    return res


# ---------------------------------------------------------------------------
# CSV


def write_paths_csv(path, times, values, meta=None):
    """CSV ``path_id,t,value`` with round-trip floats, plus ``<path>.json``."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    times = np.asarray(times, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write("path_id,t,value\n")
        for i, row in enumerate(values):
            fh.write("".join(f"{i},{float(t)!r},{float(v)!r}\n" for t, v in zip(times, row)))
    if meta is not None:
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


def read_paths_csv(path):
    """Read a ``path_id,t,value`` CSV into (times, values matrix).

    Raises StructuralError on a missing header, empty body, or paths that
    do not share one time grid.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["path_id", "t", "value"]:
            raise StructuralError(f"{path}: expected header 'path_id,t,value'")
        rows = {}
        for ln, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                pid, t, v = int(rec[0]), float(rec[1]), float(rec[2])
            except (ValueError, IndexError) as exc:
                raise StructuralError(f"{path}:{ln}: malformed row {rec!r}") from exc
            rows.setdefault(pid, []).append((t, v))
    if not rows:
        raise StructuralError(f"{path}: no data rows")
    ids = sorted(rows)
    times = np.array([t for t, _ in rows[ids[0]]])
    values = np.empty((len(ids), times.size))
    for k, pid in enumerate(ids):
        ts = np.array([t for t, _ in rows[pid]])
        if ts.shape != times.shape or not np.array_equal(ts, times):
            raise StructuralError(f"{path}: path {pid} uses a different time grid")
        values[k] = [v for _, v in rows[pid]]
    return times, values

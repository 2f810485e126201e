"""Cumulants, characteristic-function series and codifference of the
Rosenblatt law, plus the moment/partition combinatorics.

The circular integrals

    R_{H,k}(ψ) = ∫ ψ(x₁)…ψ(x_k) Π|x_i − x_{i+1}|^{H−1} |x_k − x₁|^{H−1} dx

are estimated by importance sampling: x₁ is uniform on the support hull
and every chain step d_i = x_{i+1} − x_i is drawn from a density ∝ |d|^β,
which absorbs most of the |d_i|^{H−1} singularity.  The closing factor is
left in the weight; β is placed in the window that keeps the weight
square-integrable.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, ParameterError, RangeError, ResourceError
from .sampling import RngStream
from .stats import EstimateWithError

__all__ = [
    "CumulantRequest",
    "CodifferenceRequest",
    "check_H",
    "sigma_of_H",
    "R_Hk",
    "cumulant_kappa",
    "log_cf_series",
    "I_k_shifted",
    "I2_closed_form",
    "unit_R",
    "admissible_radius",
    "codifference",
    "dependence_exponent",
    "set_partitions",
    "moments_from_cumulants",
    "count_connected_pair_graphs",
]

_CHUNK = 1 << 17
_DEFAULT_SAMPLES = 1 << 20


def check_H(H):
    H = float(H)
    if not 0.5 < H < 1.0:
        raise ParameterError(f"Hurst parameter must lie in (1/2, 1), got {H}")
    return H


def sigma_of_H(H):
    """σ = √(H(2H−1)/2)."""
    H = check_H(H)
    return math.sqrt(0.5 * H * (2.0 * H - 1.0))


@dataclass(frozen=True)
class CumulantRequest:
    """ψ(x) = Σ θ_j 1_{[0, t_j]}(x) at order k."""

    H: float
    k: int
    thetas: tuple = (1.0,)
    ts: tuple = (1.0,)

    def __post_init__(self):
        check_H(self.H)
        th = tuple(float(v) for v in np.atleast_1d(self.thetas))
        ts = tuple(float(v) for v in np.atleast_1d(self.ts))
        if len(th) != len(ts) or not th:
            raise ParameterError("thetas and ts must be non-empty and of equal length")
        if any(t < 0 or not math.isfinite(t) for t in ts):
            raise ParameterError("times must be finite and non-negative")
        if int(self.k) < 2:
            raise ParameterError(f"order k must be at least 2, got {self.k}")
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "k", int(self.k))

    def psi(self, x):
        out = np.zeros_like(x)
        for th, t in zip(self.thetas, self.ts):
            out += th * ((x >= 0.0) & (x <= t))
        return out

    @property
    def span(self):
        return max(self.ts)

    @property
    def is_zero(self):
        return self.span == 0 or all(th == 0 for th in self.thetas)


def _beta(H, k):
    if k == 2:
        return 2.0 * H - 2.0
    cap = min(0.0, 2.0 * H - 1.0 + (2.0 * H - 2.0) / (k - 1))
    return 0.5 * (-1.0 + cap)


def _steps(rng, n, m, span, beta):
    """n×m draws from the density (β+1)|d|^β / (2 span^{β+1}) on [−span, span]."""
    mag = span * rng.random((n, m)) ** (1.0 / (beta + 1.0))
    return np.where(rng.random((n, m)) < 0.5, -mag, mag)


def _mc_circular(H, k, psi, lo, hi, n_samples, stream):
    """Importance-sampled estimate of R_{H,k} for ψ supported in [lo, hi]."""
    span = hi - lo
    beta = _beta(H, k)
    cb = (beta + 1.0) / (2.0 * span ** (beta + 1.0))
    rng = stream.generator()
    s1 = s2 = 0.0
    done = 0
    while done < n_samples:
        n = min(_CHUNK, n_samples - done)
        x1 = lo + span * rng.random(n)
        d = _steps(rng, n, k - 1, span, beta)
        x = np.concatenate([x1[:, None], x1[:, None] + np.cumsum(d, axis=1)], axis=1)
        ad = np.abs(d)
        # coincident points have probability zero; their weight is dropped below
        with np.errstate(divide="ignore", invalid="ignore"):
            w = span * np.prod(ad ** (H - 1.0 - beta) / cb, axis=1)
            w *= np.abs(x[:, -1] - x[:, 0]) ** (H - 1.0)
        w *= np.prod(psi(x), axis=1)
        w[~np.isfinite(w)] = 0.0
        s1 += w.sum()
        s2 += np.dot(w, w)
        done += n
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / n_samples)


def _R2_exact(req):
    H = req.H
    th = np.array(req.thetas)
    t = np.array(req.ts)
    h2 = 2.0 * H
    m = t[:, None] ** h2 + t[None, :] ** h2 - np.abs(t[:, None] - t[None, :]) ** h2
    return float(th @ m @ th / (h2 * (h2 - 1.0)))


def R_Hk(req, method="auto", n_samples=_DEFAULT_SAMPLES, stream=None, target_se=None):
    """R_{H,k}(ψ) with standard error.

    ``method``: ``"exact"`` (k = 2 only), ``"mc"``, or ``"auto"`` (exact for
    k = 2, Monte Carlo otherwise).  ``target_se`` makes an unattained
    standard error an AccuracyError.
    """
    if req.is_zero:
        return EstimateWithError(0.0, 0.0, 0)
    if method == "exact" or (method == "auto" and req.k == 2):
        if req.k != 2:
            raise ParameterError("closed form is available for k = 2 only")
        return EstimateWithError(_R2_exact(req), 0.0, 0)
    if method not in ("mc", "auto"):
        raise ParameterError(f"unknown method {method!r}")
    stream = stream or RngStream(0, req.k)
    val, se = _mc_circular(req.H, req.k, req.psi, 0.0, req.span, int(n_samples), stream)
    if target_se is not None and se > target_se:
        raise AccuracyError(f"R_Hk standard error {se:.3e} above target {target_se:.3e}",
                            estimate=val, achieved=se)
    return EstimateWithError(val, se, int(n_samples))


def cumulant_kappa(req, **kw):
    """κ_k = 2^{k−1}(k−1)! σ^k R_{H,k}."""
    c = 2.0 ** (req.k - 1) * math.factorial(req.k - 1) * sigma_of_H(req.H) ** req.k
    r = R_Hk(req, **kw)
    return EstimateWithError(c * r.value, abs(c) * r.stderr, r.n)


def unit_R(H, kmax, n_samples=_DEFAULT_SAMPLES // 4, seed=0):
    """R_{H,k}(1_{[0,1]}) for k = 2..kmax (k = 2 exact)."""
    out = {}
    for k in range(2, kmax + 1):
        out[k] = R_Hk(CumulantRequest(H, k), n_samples=n_samples, stream=RngStream(seed, 1000 + k))
    return out


def log_cf_series(H, thetas, ts, kmax=6, n_samples=_DEFAULT_SAMPLES // 4, seed=0, R=None):
    """½ Σ_{k=2}^{kmax} (2iσ)^k/k · R_{H,k}(ψ), ψ = Σθ_j 1_{[0,t_j]}.

    Returns a dict with the complex ``value``, its ``stderr``, the per-order
    ``terms``, the geometric ``ratio`` 2σ·max_k R_k^{1/k} and the flag
    ``convergent`` (ratio < 0.9).  ``R`` may pass precomputed R_{H,k}(ψ).
    """
    H = check_H(H)
    if kmax < 2:
        raise ParameterError(f"kmax must be at least 2, got {kmax}")
    sig = sigma_of_H(H)
    if R is None:
        R = {k: R_Hk(CumulantRequest(H, k, thetas, ts), n_samples=n_samples,
                     stream=RngStream(seed, 2000 + k)) for k in range(2, kmax + 1)}
    value = 0j
    var = 0.0
    terms = {}
    for k in range(2, kmax + 1):
        c = 0.5 * (2j * sig) ** k / k
        terms[k] = c * R[k].value
        value += terms[k]
        var += abs(c) ** 2 * R[k].stderr ** 2
    cmax = max(abs(R[k].value) ** (1.0 / k) for k in range(2, kmax + 1))
    ratio = 2.0 * sig * cmax
    return {"value": value, "stderr": math.sqrt(var), "terms": terms,
            "ratio": ratio, "convergent": bool(ratio < 0.9)}


# ---------------------------------------------------------------------------
# shifted integrals and codifference


@dataclass(frozen=True)
class CodifferenceRequest:
    H: float
    z1: float
    z2: float
    s: float
    t: float
    tau_grid: tuple
    kmax: int = 6

    def __post_init__(self):
        check_H(self.H)
        if not self.s < self.t:
            raise ParameterError(f"need s < t, got s={self.s}, t={self.t}")
        tau = tuple(float(v) for v in np.atleast_1d(self.tau_grid))
        if not tau or any(v <= 0 for v in tau) or any(np.diff(tau) <= 0):
            raise ParameterError("tau grid must be increasing and positive")
        if int(self.kmax) < 2:
            raise ParameterError("kmax must be at least 2")
        object.__setattr__(self, "tau_grid", tau)
        object.__setattr__(self, "kmax", int(self.kmax))


def I2_closed_form(H, s, t, tau):
    """I₂(0,1) = [(τ+Δ)^{2H} + (τ−Δ)^{2H} − 2τ^{2H}] / (2H(2H−1)), τ ≥ Δ."""
    d = t - s
    tau = np.asarray(tau, dtype=float)
    h2 = 2.0 * H
    return ((tau + d) ** h2 + np.abs(tau - d) ** h2 - 2.0 * tau ** h2) / (h2 * (h2 - 1.0))


def _mc_shifted(H, eps, s, t, taus, n_samples, stream):
    """Estimates of I_k(ε) at every τ with common random numbers.

    In shifted coordinates x'_i ∈ [s, t] the factor for link (i, i+1) is
    |x'_i − x'_{i+1} + (ε_i − ε_{i+1})τ|^{H−1}.  Unshifted links are
    importance-sampled as in the circular integral, shifted links use an
    independent uniform point.
    """
    k = len(eps)
    s, t = float(s), float(t)
    span = t - s
    beta = _beta(H, k)
    cb = (beta + 1.0) / (2.0 * span ** (beta + 1.0))
    taus = np.asarray(taus, dtype=float)
    rng = stream.generator()
    s1 = np.zeros(taus.size)
    s2 = np.zeros(taus.size)
    done = 0
    while done < n_samples:
        n = min(_CHUNK // 4, n_samples - done)
        x = np.empty((n, k))
        x[:, 0] = s + span * rng.random(n)
        w = np.full(n, span)
        shift_terms = []
        for i in range(k - 1):
            de = eps[i] - eps[i + 1]
            if de == 0:
                d = _steps(rng, n, 1, span, beta)[:, 0]
                x[:, i + 1] = x[:, i] + d
                with np.errstate(divide="ignore"):
                    w *= np.abs(d) ** (H - 1.0 - beta) / cb
            else:
                x[:, i + 1] = s + span * rng.random(n)
                w *= span
                shift_terms.append((x[:, i] - x[:, i + 1], de))
        inside = np.all((x >= s) & (x <= t), axis=1)
        w *= inside
        de = eps[-1] - eps[0]
        if de == 0:
            with np.errstate(divide="ignore", invalid="ignore"):
                w *= np.abs(x[:, -1] - x[:, 0]) ** (H - 1.0)
        else:
            shift_terms.append((x[:, -1] - x[:, 0], de))
        w[~np.isfinite(w)] = 0.0
        full = np.repeat(w[:, None], taus.size, axis=1)
        for diff, de in shift_terms:
            full *= np.abs(diff[:, None] + de * taus[None, :]) ** (H - 1.0)
        s1 += full.sum(axis=0)
        s2 += (full * full).sum(axis=0)
        done += n
    mean = s1 / n_samples
    var = np.maximum(s2 / n_samples - mean * mean, 0.0)
    return mean, np.sqrt(var / n_samples)


def I_k_shifted(H, k, eps, s, t, tau, n_samples=1 << 18, seed=0):
    """I_k(ε₁..ε_k) over ×_i [s + ε_iτ, t + ε_iτ] with standard error.

    ``tau`` may be a vector; all τ share the same samples.
    """
    H = check_H(H)
    eps = tuple(int(e) for e in eps)
    if len(eps) != k or any(e not in (0, 1) for e in eps):
        raise ParameterError("eps must be a 0/1 vector of length k")
    if not s < t:
        raise ParameterError("need s < t")
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if k == 2 and eps[0] != eps[1]:
        return I2_closed_form(H, s, t, tau), np.zeros_like(tau)
    key = _canonical(eps)
    stream = RngStream(seed, 3000 + k, (int("".join(map(str, key)), 2),))
    return _mc_shifted(H, key, s, t, tau, int(n_samples), stream)


def _canonical(eps):
    """Representative under rotation, reflection and complement (all keep I_k)."""
    k = len(eps)
    cands = []
    for seq in (eps, eps[::-1]):
        for c in (seq, tuple(1 - e for e in seq)):
            cands.extend(tuple(c[(i + r) % k] for i in range(k)) for r in range(k))
    return min(cands)


def admissible_radius(H, s, t, kmax, R=None):
    """Radius ρ with (|z1| + |z2|)·2σ·C(s,t) < 1 ⇔ |z1| + |z2| < ρ.

    C(s,t) = Δ^H · max_k R_k(1_{[0,1]})^{1/k}.
    """
    R = R or unit_R(H, kmax)
    c = (t - s) ** H * max(abs(R[k].value) ** (1.0 / k) for k in range(2, kmax + 1))
    return 1.0 / (2.0 * sigma_of_H(H) * c), c


def codifference(req, n_samples=1 << 17, seed=0, R=None):
    """|½ Σ_{k=2}^{kmax} (2iσ)^k/k · R̃̃_k(τ)| on req.tau_grid.

    R̃̃_k = Σ_{j=1}^{k−1} z1^{k−j} z2^j Σ_{|ε|=j} I_k(ε).  Returns a dict with
    ``tau``, ``D``, the per-order moduli and the admissibility data.
    """
    H, s, t = req.H, req.s, req.t
    radius, c_st = admissible_radius(H, s, t, req.kmax, R)
    if abs(req.z1) + abs(req.z2) >= radius:
        raise ParameterError(
            f"(z1, z2) = ({req.z1}, {req.z2}) violates the geometric bound "
            f"(|z1|+|z2|)·2σ·C(s,t) < 1 (|z1|+|z2| must stay below {radius:.4g})")
    sig = sigma_of_H(H)
    taus = np.array(req.tau_grid)
    total = np.zeros(taus.size, dtype=complex)
    by_order = {}
    cache = {}
    for k in range(2, req.kmax + 1):
        rr = np.zeros(taus.size)
        for eps in itertools.product((0, 1), repeat=k):
            j = sum(eps)
            if j == 0 or j == k:
                continue
            key = _canonical(eps)
            if key not in cache:
                cache[key] = I_k_shifted(H, k, key, s, t, taus, n_samples, seed)[0]
            rr += req.z1 ** (k - j) * req.z2 ** j * cache[key]
        term = 0.5 * (2j * sig) ** k / k * rr
        by_order[k] = np.abs(term)
        total += term
    D = np.abs(total)
    return {"tau": taus, "D": D, "orders": by_order, "admissible_radius": radius, "C": c_st}


def dependence_exponent(req, **kw):
    """Negated least-squares slope of log D against log τ, with a 95% CI."""
    from scipy import stats as _st

    taus = np.array(req.tau_grid)
    if taus.max() / taus.min() < 100.0 * (1 - 1e-9) or taus.size < 3:
        raise ParameterError("tau grid must span at least two decades with three or more points")
    res = codifference(req, **kw)
    D = res["D"]
    if np.any(D < 1e-300):
        raise RangeError("codifference underflowed below 1e-300; use smaller tau or larger z")
    fit = _st.linregress(np.log(taus), np.log(D))
    half = _st.t.ppf(0.975, taus.size - 2) * fit.stderr
    res.update({"exponent": -fit.slope, "slope": fit.slope, "slope_ci": (fit.slope - half, fit.slope + half)})
    return res


# ---------------------------------------------------------------------------
# combinatorics


def set_partitions(n):
    """All set partitions of {0..n−1} as lists of blocks."""
    def rec(i, blocks):
        if i == n:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def moments_from_cumulants(kappas):
    """μ_n = Σ_π Π_{B∈π} κ_{#B} from κ₁..κ_n."""
    n = len(kappas)
    if n < 1:
        raise ParameterError("need at least κ₁")
    if n > 10:
        raise ResourceError(f"order {n} exceeds the partition-count guard (10)")
    return float(sum(math.prod(kappas[len(b) - 1] for b in p) for p in set_partitions(n)))


def count_connected_pair_graphs(k):
    """Connected perfect matchings of 2k legs (two per vertex, no self-links)."""
    k = int(k)
    if not 2 <= k <= 8:
        raise ParameterError(f"k must lie in 2..8, got {k}")
    owner = [i // 2 for i in range(2 * k)]

    def matchings(free):
        if not free:
            yield []
            return
        a = free[0]
        for idx in range(1, len(free)):
            b = free[idx]
            if owner[a] == owner[b]:
                continue
            rest = free[1:idx] + free[idx + 1:]
            for m in matchings(rest):
                yield [(owner[a], owner[b])] + m

    def connected(edges):
        parent = list(range(k))

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for a, b in edges:
            parent[find(a)] = find(b)
        return len({find(v) for v in range(k)}) == 1

    return sum(1 for m in matchings(list(range(2 * k))) if connected(m))

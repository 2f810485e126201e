"""The charged α-stable particle system, its exact finite-T oracles and the
convergence experiment towards the Rosenblatt process.

With ψ_t = 1_{(0,t]} (or 1_{(0,t]} − 1_{(−t,0]} for the sub variant)

    ξ^T_t = (1/T) Σ_{j≠k} σ_j σ_k Λ_ε(x_j + ρʲ, x_k + ρᵏ; ψ_t)

where Λ_ε is the grid Riemann sum of the mollified intersection local
time.  Only grid-time samples inside W = hull(supp ψ) ± ε contribute, so
the simulator generates exactly those samples:

* ``method="exact"`` draws the infinite Poisson system restricted to the
  particles that ever visit W.  By reversibility of the symmetric walk
  under Lebesgue measure, the particles whose first grid visit to W happens
  at step m form a Poisson process on W with intensity
  P_z(backward walk avoids W for m steps) dz, independent over m.
* ``method="window"`` simulates every particle of a Poisson field on
  [−L, L] explicitly.

Writing A_i = Σ_{l: owner ≠ owner_i} σ_l f_ε(p_l − p_i) over samples,
ξ^T_t = (dt²/T) Σ_i σ_i ψ_t(p_i) A_i, which needs only sample pairs closer
than ε.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .errors import ParameterError, ResourceError
from .ilt import MollifierSpec, StepFunction, check_alpha, discrete_time_kernel, time_kernel_gT
from .process import SamplePath, covariance_matrix, _grid, _variant
from .quadrature import fourier_pair_integral
from .sampling import RngStream, poisson_field, rademacher_charges, stable_variates
from .stats import Ensemble, covariance_matrix_estimate, shape_correlation

__all__ = [
    "ParticleSystemConfig",
    "StableParticleSystem",
    "ConvergenceReport",
    "default_dt",
    "build_window_system",
    "xi_from_samples",
    "simulate_xi_T",
    "simulate_xi_T_ensemble",
    "xiT_increment_variance",
    "xiT_simulation_variance",
    "limit_scale_K",
    "limit_scale_K_closed_form",
    "convergence_experiment",
]

_PAIR_CAP = 50_000_000
_REPLICA_CHUNK = 16
_BACK_BLOCK_MAX = 512


def default_dt(alpha, epsilon):
    """Largest dyadic step whose median |increment| is below ε/4."""
    from scipy.stats import levy_stable

    med = float(levy_stable.ppf(0.75, alpha, 0.0))
    dt = (epsilon / (4.0 * med)) ** alpha
    return 2.0 ** math.floor(math.log2(dt))


@dataclass(frozen=True)
class ParticleSystemConfig:
    """Parameters of one ξ^T simulation.

    ``L`` is only used by the window method (default c_L·T^{1/α});
    ``r_cut`` must be at least ε and is recorded for audit: the pair sum
    over grid samples needs no cutoff beyond ε.
    """

    alpha: float
    T: float
    epsilon: float = 0.05
    dt: float = None
    L: float = None
    r_cut: float = None
    intensity: float = 1.0
    method: str = "exact"
    shape: str = "bump"
    c_L: float = 4.0

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.T > 0:
            raise ParameterError(f"horizon T must be positive, got {self.T}")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not self.intensity > 0:
            raise ParameterError("intensity must be positive")
        if self.method not in ("exact", "window"):
            raise ParameterError(f"method must be 'exact' or 'window', got {self.method!r}")
        dt = self.dt if self.dt is not None else default_dt(self.alpha, self.epsilon)
        if not dt > 0:
            raise ParameterError(f"dt must be positive, got {dt}")
        n = round(self.T / dt)
        if n < 1 or abs(n * dt - self.T) > 1e-9 * self.T:
            raise ParameterError(f"T={self.T} must be a multiple of dt={dt}")
        object.__setattr__(self, "dt", float(dt))
        if self.L is None:
            object.__setattr__(self, "L", float(self.c_L * self.T ** (1.0 / self.alpha)))
        if not self.L > 0:
            raise ParameterError("L must be positive")
        rc = self.epsilon if self.r_cut is None else float(self.r_cut)
        if rc < self.epsilon:
            raise ParameterError(f"r_cut={rc} must be at least epsilon={self.epsilon}")
        object.__setattr__(self, "r_cut", rc)
        MollifierSpec(self.epsilon, self.shape)

    @property
    def steps(self):
        return int(round(self.T / self.dt))

    @property
    def mollifier(self):
        return MollifierSpec(self.epsilon, self.shape)


@dataclass
class StableParticleSystem:
    """Explicit finite system: start points, charges, and grid paths ρʲ."""

    points: np.ndarray
    charges: np.ndarray
    paths: np.ndarray
    dt: float

    def positions(self):
        return self.points[:, None] + self.paths


def _window(t_max, variant, eps):
    lo = -t_max if variant == "sub" else 0.0
    return lo - eps, t_max + eps


def _exact_samples(cfg, w_lo, w_hi, rng):
    """Grid samples inside [w_lo, w_hi] of all particles of the infinite system."""
    n = cfg.steps
    width = w_hi - w_lo
    scale = cfg.dt ** (1.0 / cfg.alpha)
    a = cfg.alpha
    # candidates for first visit at step m = 0..n−1
    counts = rng.poisson(width * cfg.intensity, n)
    m = np.repeat(np.arange(n), counts)
    z = w_lo + width * rng.random(m.size)
    keep = np.ones(m.size, dtype=bool)
    alive = np.flatnonzero(m > 0)
    pos = z[alive].copy()
    # walk backwards in blocks of steps; any visit to the window rejects the candidate
    s, block = 0, 16
    while alive.size:
        ma = m[alive]
        path = pos[:, None] + np.cumsum(scale * stable_variates(a, (alive.size, block), rng), axis=1)
        valid = (s + 1 + np.arange(block))[None, :] <= ma[:, None]
        hit = np.any(valid & (path >= w_lo) & (path <= w_hi), axis=1)
        keep[alive[hit]] = False
        s += block
        go = ~hit & (ma > s)
        alive = alive[go]
        pos = path[go, -1]
        block = min(2 * block, _BACK_BLOCK_MAX)
    m = m[keep]
    z = z[keep]
    # forward from the first visit; padded steps past n−1 are discarded
    k = m.size
    out_pos, out_owner, out_step = [], [], []
    steps_left = n - 1 - m
    order = np.argsort(-steps_left, kind="stable")
    for c0 in range(0, k, 256):
        idx = order[c0:c0 + 256]
        width_steps = int(steps_left[idx].max()) if idx.size else 0
        inc = scale * stable_variates(a, (idx.size, width_steps), rng) if width_steps else np.zeros((idx.size, 0))
        path = z[idx, None] + np.concatenate([np.zeros((idx.size, 1)), np.cumsum(inc, axis=1)], axis=1)
        step = m[idx, None] + np.arange(width_steps + 1)[None, :]
        ok = (step < n) & (path >= w_lo) & (path <= w_hi)
        r, c = np.nonzero(ok)
        out_pos.append(path[r, c])
        out_owner.append(idx[r])
        out_step.append(step[r, c])
    if not out_pos:
        return np.empty(0), np.empty(0, dtype=np.int64), 0
    return np.concatenate(out_pos), np.concatenate(out_owner), k


def build_window_system(cfg, stream):
    """Explicit Poisson system on [−L, L] with full grid paths."""
    field_ = poisson_field(cfg.intensity, cfg.L, stream.child(0))
    charges = rademacher_charges(field_.count, stream.child(1))
    rng = stream.child(2).generator()
    scale = cfg.dt ** (1.0 / cfg.alpha)
    inc = scale * stable_variates(cfg.alpha, (field_.count, cfg.steps - 1), rng)
    paths = np.concatenate([np.zeros((field_.count, 1)), np.cumsum(inc, axis=1)], axis=1)
    return StableParticleSystem(field_.points, charges, paths, cfg.dt)


def xi_from_samples(pos, owner, charge, t_grid, variant, cfg):
    """ξ^T on t_grid from grid samples (positions, owner ids, owner charges)."""
    t = np.asarray(t_grid, dtype=float)
    out = np.zeros(t.size)
    if pos.size == 0:
        return out
    eps = cfg.epsilon
    order = np.argsort(pos, kind="stable")
    p, o, sg = pos[order], owner[order], charge[order].astype(float)
    t_max = t.max()
    lo_supp = -t_max if variant == "sub" else 0.0
    centre = np.flatnonzero((p > lo_supp) & (p <= t_max))
    if centre.size == 0:
        return out
    lo = np.searchsorted(p, p[centre] - eps, side="right")
    hi = np.searchsorted(p, p[centre] + eps, side="left")
    cnt = hi - lo
    total = int(cnt.sum())
    if total > _PAIR_CAP:
        raise ResourceError(
            f"{total} sample pairs exceed the cap {_PAIR_CAP}; reduce L or T, or coarsen dt")
    own = np.repeat(np.arange(centre.size), cnt)
    nb = np.repeat(lo - np.concatenate(([0], np.cumsum(cnt)[:-1])), cnt) + np.arange(total)
    ci = centre[own]
    other = o[nb] != o[ci]
    vals = np.where(other, sg[nb] * cfg.mollifier(p[nb] - p[ci]), 0.0)
    A = np.bincount(own, vals, minlength=centre.size)
    contrib = sg[centre] * A
    pc = p[centre]
    for j, tt in enumerate(t):
        w = ((pc > 0) & (pc <= tt)).astype(float)
        if variant == "sub":
            w -= ((pc > -tt) & (pc <= 0)).astype(float)
        out[j] = np.dot(w, contrib)
    return out * cfg.dt ** 2 / cfg.T


def _one_replica(cfg, t, variant, stream):
    w_lo, w_hi = _window(t.max(), variant, cfg.epsilon)
    if cfg.method == "exact":
        rng = stream.generator()
        pos, owner, k = _exact_samples(cfg, w_lo, w_hi, rng)
        charges = rademacher_charges(k, stream.child(1))
        return xi_from_samples(pos, owner, charges[owner], t, variant, cfg)
    sys_ = build_window_system(cfg, stream)
    x = sys_.positions()
    r, c = np.nonzero((x >= w_lo) & (x <= w_hi))
    return xi_from_samples(x[r, c], r, sys_.charges[r], t, variant, cfg)


def simulate_xi_T_ensemble(cfg, t_grid, variant, seed, replicas, first_id=0, threads=1):
    """Matrix (replicas × len(t_grid)) of ξ^T; replica i uses stream (seed, first_id + i)."""
    _variant(variant)
    t = _grid(t_grid)
    replicas = int(replicas)
    out = np.empty((replicas, t.size))

    def run(c0):
        for i in range(c0, min(replicas, c0 + _REPLICA_CHUNK)):
            out[i] = _one_replica(cfg, t, variant, RngStream(seed, first_id + i))

    starts = range(0, replicas, _REPLICA_CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(run, starts))
    else:
        for c0 in starts:
            run(c0)
    if t[0] == 0:
        out[:, 0] = 0.0
    return out


def simulate_xi_T(cfg, t_grid, variant, stream):
    """One realisation of ξ^T on t_grid."""
    vals = simulate_xi_T_ensemble(cfg, t_grid, variant, stream.seed, 1, stream.stream_id)[0]
    meta = {"generator": "particle", "alpha": cfg.alpha, "variant": variant,
            "seed": stream.seed, "stream_id": stream.stream_id, "config": asdict(cfg)}
    return SamplePath(t_grid, vals, meta)


# ---------------------------------------------------------------------------
# oracles


def xiT_increment_variance(t1, t2, T, alpha, variant="standard", rtol=1e-4, return_error=False):
    """E(ξ^T_{t2} − ξ^T_{t1})² = (1/(2π²T²)) ∬ |ψ̂(x+y)|² g_T(x) g_T(y) dx dy."""
    alpha = check_alpha(alpha)
    if not 0 <= t1 <= t2:
        raise ParameterError(f"need 0 ≤ t1 ≤ t2, got {t1}, {t2}")
    if not T > 0:
        raise ParameterError("T must be positive")
    if t1 == t2:
        return (0.0, 0.0) if return_error else 0.0
    psi = StepFunction.increment(t1, t2, variant)
    g = lambda x: time_kernel_gT(x, T, alpha)
    v, e = fourier_pair_integral(psi, lambda x, y: g(x) * g(y), rtol=rtol)
    c = 1.0 / (2 * math.pi ** 2 * T * T)
    return (c * v, c * e) if return_error else c * v


def xiT_simulation_variance(t1, t2, cfg, variant="standard", rtol=1e-4, return_error=False):
    """Exact E(ξ^T_{t2} − ξ^T_{t1})² of the simulator (mollified, on the dt grid).

    (1/(4π²T²)) ∬ |ψ̂(x+y)|² [f̂(εy)² + f̂(εx)f̂(εy)] G(x) G(y) dx dy with the
    grid time kernel G; the two terms are the ordered pair (j,k) and its swap.
    """
    if t1 == t2:
        return (0.0, 0.0) if return_error else 0.0
    psi = StepFunction.increment(t1, t2, variant)
    spec = cfg.mollifier

    def k(x, y):
        fx, fy = spec.fourier(x), spec.fourier(y)
        gx = discrete_time_kernel(x, cfg.T, cfg.alpha, cfg.dt)
        gy = discrete_time_kernel(y, cfg.T, cfg.alpha, cfg.dt)
        return gx * gy * fy * (fx + fy)

    v, e = fourier_pair_integral(psi, k, rtol=rtol)
    c = 1.0 / (4 * math.pi ** 2 * cfg.T ** 2)
    return (c * v, c * e) if return_error else c * v


def limit_scale_K(alpha, t=1.0, rtol=1e-4, return_error=False):
    """K = √((2/π²) ∬ |1̂_{[0,t]}(x+y)|² |x|^{−α}|y|^{−α} dx dy), reported at t = 1.

    For t ≠ 1 the returned value is √ of the same integral, which equals
    K·t^α.
    """
    alpha = check_alpha(alpha)
    psi = StepFunction.indicator(0.0, t)
    v, e = fourier_pair_integral(psi, lambda x, y: np.abs(x) ** -alpha * np.abs(y) ** -alpha, rtol=rtol)
    K2 = 2.0 / math.pi ** 2 * v
    K = math.sqrt(K2)
    return (K, 2.0 / math.pi ** 2 * e / (2 * K)) if return_error else K


def limit_scale_K_closed_form(alpha):
    """K from the real-space limit 4·(2Γ(1−α) sin(πα/2)/π)² / (2α(2α−1))."""
    alpha = check_alpha(alpha)
    c = 2.0 * special.gamma(1 - alpha) * math.sin(math.pi * alpha / 2) / math.pi
    return math.sqrt(4.0 * c * c / (2 * alpha * (2 * alpha - 1)))


# ---------------------------------------------------------------------------
# convergence experiment


@dataclass
class ConvergenceReport:
    alpha: float
    T: list
    n_replicas: int
    t_grid: list
    emp_cov: list
    K_hat: list
    K_oracle: float
    shape_corr: list
    var_residuals: list
    seed: int
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, default=float)


def convergence_experiment(template, T_list, t_grid, replicas, seed, variant="standard", threads=1):
    """Simulate ξ^T for each horizon and compare with K²·(Rosenblatt covariance).

    ``template`` is a ParticleSystemConfig whose T is replaced per horizon.
    Variance residuals are reported at the last grid point against both the
    continuum oracle and the simulator's exact (mollified, gridded) oracle.
    """
    T_list = [float(v) for v in T_list]
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ParameterError("T_list must be increasing")
    if int(replicas) < 500:
        raise ParameterError("the convergence experiment needs at least 500 replicas")
    t = _grid(t_grid)
    target = covariance_matrix(t, template.alpha, variant)
    K_or = limit_scale_K(template.alpha)
    covs, khat, corr, resid = [], [], [], []
    for T in T_list:
        cfg = ParticleSystemConfig(template.alpha, T, template.epsilon, template.dt, None,
                                   template.r_cut, template.intensity, template.method,
                                   template.shape, template.c_L)
        vals = simulate_xi_T_ensemble(cfg, t, variant, seed, replicas, threads=threads)
        cov, se = covariance_matrix_estimate(Ensemble(vals, t))
        c, k2 = shape_correlation(cov, target)
        covs.append(cov.ravel().tolist())
        khat.append(math.sqrt(max(k2, 0.0)))
        corr.append(c)
        v_cont = xiT_increment_variance(0.0, t[-1], T, template.alpha, variant)
        v_sim = xiT_simulation_variance(0.0, t[-1], cfg, variant)
        resid.append({"T": T, "emp_var": cov[-1, -1], "stderr": se[-1, -1],
                      "oracle": v_cont, "sim_oracle": v_sim,
                      "rel_resid": cov[-1, -1] / v_cont - 1.0,
                      "z_sim": (cov[-1, -1] - v_sim) / se[-1, -1]})
    return ConvergenceReport(template.alpha, T_list, int(replicas), t.tolist(), covs, khat, K_or,
                             corr, resid, int(seed))

"""Command-line entry point: ``rosenblatt {simulate, oracle, verify}``.

Exit codes: 0 success, 2 usage or input error, 3 resource guard,
4 accuracy failure.
"""

import argparse
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import stats as _st

from . import __version__
from .cumulants import (CodifferenceRequest, CumulantRequest, R_Hk, admissible_radius,
                        cumulant_kappa, dependence_exponent, unit_R)
from .errors import AccuracyError, ParameterError, RosenblattError, StructuralError
from .ilt import MollifierSpec, StepFunction, ilt_l2_norm, ilt_mollification_error
from .particles import (ParticleSystemConfig, limit_scale_K, simulate_xi_T_ensemble,
                        xiT_increment_variance, xiT_simulation_variance)
from .process import (SpectralGridSpec, covariance_matrix, donsker_ensemble, read_paths_csv,
                      selfsimilarity_check, spectral_ensemble, write_paths_csv, _json_default)
from .stats import Ensemble, covariance_matrix_estimate, k_statistics

SEED_ENV = "ROSENBLATT_SEED"
_BLOCK = 64


class UsageError(ParameterError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_t_grid(spec):
    """``start:stop:step`` (inclusive stop) or a comma list."""
    try:
        if ":" in spec:
            a, b, h = (float(v) for v in spec.split(":"))
            if h <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / h + 1e-9))
            return [a + i * h for i in range(n + 1)]
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"malformed --t-grid {spec!r}; use start:stop:step") from exc


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read --config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("--config must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _resolve(args, defaults):
    """Defaults < config file < CLI flags; the seed also honours the environment."""
    cfg = _load_config(getattr(args, "config", None))
    out = {}
    for key, dflt in defaults.items():
        val = getattr(args, key, None)
        out[key] = val if val is not None else cfg.get(key, dflt)
    if "seed" in defaults:
        if getattr(args, "seed", None) is not None:
            out["seed"] = args.seed
        elif os.environ.get(SEED_ENV):
            try:
                out["seed"] = int(os.environ[SEED_ENV])
            except ValueError as exc:
                raise UsageError(f"{SEED_ENV} must be an integer") from exc
    return out


# ---------------------------------------------------------------------------
# simulate


_SIM_DEFAULTS = {
    "method": None, "H": None, "alpha": None, "paths": 1, "t_grid": "0:1:0.125",
    "variant": "standard", "seed": 0, "out": None, "threads": 1, "n": 1 << 14,
    "rescale": False, "T": 50.0, "epsilon": 0.05, "dt": None, "L": None,
    "particle_method": "exact", "lambda_max": 100.0,
}


def _blocks(total):
    return [(b, min(_BLOCK, total - b)) for b in range(0, total, _BLOCK)]


def _simulate_values(p, t):
    method = p["method"]
    paths = int(p["paths"])
    if paths < 1:
        raise UsageError("--paths must be at least 1")
    seed = int(p["seed"])
    if method in ("donsker", "spectral"):
        if p["H"] is None:
            raise UsageError(f"--method {method} needs --H")
        if method == "donsker":
            if p["variant"] != "standard":
                raise UsageError("the Donsker scheme generates the standard variant only")
            job = lambda b: donsker_ensemble(p["H"], p["n"], t, seed, b[1], b[0], bool(p["rescale"]))
        else:
            grid = SpectralGridSpec(lambda_max=float(p["lambda_max"]))
            job = lambda b: spectral_ensemble(p["H"], t, seed, b[1], grid, p["variant"], b[0])
        meta = {}
    elif method == "particle":
        if p["alpha"] is None:
            raise UsageError("--method particle needs --alpha")
        a = float(p["alpha"])
        if not 0.5 < a < 1.0:
            raise UsageError(f"--alpha {a} fails the gate 1/2 < alpha < 1: two independent "
                             "alpha-stable paths have an intersection local time only for alpha > 1/2")
        cfg = ParticleSystemConfig(a, float(p["T"]), float(p["epsilon"]), p["dt"], p["L"],
                                   method=p["particle_method"])
        job = lambda b: simulate_xi_T_ensemble(cfg, t, p["variant"], seed, b[1], b[0])
        meta = {"particle_config": {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}}
    else:
        raise UsageError("--method must be one of donsker, spectral, particle")
    blocks = _blocks(paths)
    threads = max(1, int(p["threads"]))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(job, blocks))
    else:
        parts = [job(b) for b in blocks]
    return np.vstack(parts), meta


def cmd_simulate(args, out):
    p = _resolve(args, _SIM_DEFAULTS)
    t = parse_t_grid(p["t_grid"]) if isinstance(p["t_grid"], str) else list(p["t_grid"])
    values, extra = _simulate_values(p, t)
    meta = {"command": "simulate", "version": __version__, "config": p, **extra}
    if p["out"]:
        write_paths_csv(p["out"], t, values, meta)
    else:
        buf = io.StringIO()
        buf.write("path_id,t,value\n")
        for i, row in enumerate(values):
            for tt, v in zip(t, row):
                buf.write(f"{i},{float(tt)!r},{float(v)!r}\n")
        out.write(buf.getvalue())
    return 0


# ---------------------------------------------------------------------------
# oracle


_ORACLE_PARAMS = {
    "r2": ("H", "t", "theta", "method", "samples"),
    "kappa": ("H", "k", "t", "theta", "samples"),
    "xiT-var": ("alpha", "T", "t1", "t2", "variant"),
    "ilt-l2": ("alpha", "T", "a", "b", "epsilon"),
    "K": ("alpha",),
}


def cmd_oracle(args, out):
    kind = args.kind
    params = {k: getattr(args, k) for k in _ORACLE_PARAMS[kind] if getattr(args, k) is not None}
    try:
        if kind == "r2":
            r = R_Hk(CumulantRequest(args.H, 2, (args.theta,), (args.t,)),
                     method=args.method, n_samples=args.samples)
            value, err = r.value, r.stderr
        elif kind == "kappa":
            r = cumulant_kappa(CumulantRequest(args.H, args.k, (args.theta,), (args.t,)),
                               n_samples=args.samples)
            value, err = r.value, r.stderr
        elif kind == "xiT-var":
            value, err = xiT_increment_variance(args.t1, args.t2, args.T, args.alpha,
                                                args.variant, return_error=True)
        elif kind == "ilt-l2":
            psi = StepFunction.indicator(args.a, args.b)
            value, err = ilt_l2_norm(psi, args.T, args.alpha, return_error=True)
            if args.epsilon is not None:
                me, mee = ilt_mollification_error(psi, args.T, args.alpha,
                                                  MollifierSpec(args.epsilon), return_error=True)
                params["mollification_error"] = {"value": me, "error": mee}
        elif kind == "K":
            value, err = limit_scale_K(args.alpha, return_error=True)
        else:
            raise UsageError(f"unknown oracle {kind!r}")
    except AccuracyError as exc:
        json.dump({"oracle": kind, "error": str(exc), "estimate": exc.estimate,
                   "achieved": exc.achieved, "params": params}, out, default=_json_default)
        out.write("\n")
        return exc.exit_code
    json.dump({"oracle": kind, "value": value, "error": err, "params": params,
               "version": __version__}, out, indent=2, default=_json_default)
    out.write("\n")
    return 0


# ---------------------------------------------------------------------------
# verify


def _check(name, target, estimate, stderr, passed, **extra):
    d = {"check": name, "target": target, "estimate": estimate, "stderr": stderr, "pass": bool(passed)}
    d.update(extra)
    return d


def _family_z(m, nsigma):
    """Bonferroni-adjusted critical value matching a two-sided nsigma level per family."""
    level = 2 * _st.norm.sf(nsigma)
    return float(_st.norm.isf(level / (2 * max(m, 1))))


def _load(args):
    if not args.input:
        raise UsageError("--in is required")
    try:
        return read_paths_csv(args.input)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from exc


def _column(times, t):
    j = int(np.argmin(np.abs(times - t)))
    if abs(times[j] - t) > 1e-9 * max(1.0, abs(t)):
        raise StructuralError(f"time {t} is not on the ensemble grid")
    return j


def verify_covariance(args):
    times, vals = _load(args)
    keep = times > 0
    ens = Ensemble(vals[:, keep], times[keep])
    cov, se = covariance_matrix_estimate(ens)
    target = covariance_matrix(ens.t_grid, args.H, args.variant)
    iu = np.triu_indices(cov.shape[0])
    z = _family_z(iu[0].size, args.nsigma)
    res = []
    for i, j in zip(*iu):
        ok = abs(cov[i, j] - target[i, j]) <= z * se[i, j]
        res.append(_check(f"cov(t={ens.t_grid[i]:g},t={ens.t_grid[j]:g})", float(target[i, j]),
                          float(cov[i, j]), float(se[i, j]), ok, z_crit=z))
    return res


def verify_selfsim(args):
    times, vals = _load(args)
    jt = _column(times, args.t)
    jct = _column(times, args.c * args.t)
    half = vals.shape[0] // 2
    a, b = vals[:half, jct], vals[half:2 * half, jt]
    good = selfsimilarity_check(a, b, args.c, args.H)
    bad = selfsimilarity_check(a, b, args.c, args.H, exponent=args.H + 0.2)
    return [
        _check("ks_selfsimilar", "p>0.01", good["statistic"], 0.0, good["pvalue"] > 0.01, pvalue=good["pvalue"]),
        _check("ks_wrong_exponent_rejected", "p<0.01", bad["statistic"], 0.0, bad["pvalue"] < 0.01, pvalue=bad["pvalue"]),
    ]


def verify_cumulants(args):
    times, vals = _load(args)
    x = vals[:, _column(times, args.t)]
    res = []
    for k in (2, 3):
        oracle = cumulant_kappa(CumulantRequest(args.H, k, (1.0,), (args.t,)), n_samples=args.samples)
        est = k_statistics(x, k, seed=args.seed)
        se = math.hypot(est.stderr, oracle.stderr)
        res.append(_check(f"kappa_{k}", oracle.value, est.value, se,
                          abs(est.value - oracle.value) <= args.nsigma * se))
    k3 = k_statistics(x, 3, seed=args.seed)
    res.append(_check("kappa_3_positive", ">0", k3.value, k3.stderr, k3.value > args.nsigma * k3.stderr))
    return res


def verify_particle(args):
    times, vals = _load(args)
    side = {}
    try:
        with open(args.input + ".json") as fh:
            side = json.load(fh).get("particle_config", {})
    except (OSError, json.JSONDecodeError):
        pass
    pick = lambda k, d: getattr(args, k) if getattr(args, k) is not None else side.get(k, d)
    cfg = ParticleSystemConfig(float(pick("alpha", 0.75)), float(pick("T", 50.0)),
                               float(pick("epsilon", 0.05)), pick("dt", None))
    res = []
    pairs = [(0.0, 0.5), (0.0, 1.0), (0.5, 1.0)]
    for t1, t2 in pairs:
        try:
            j1, j2 = _column(times, t1), _column(times, t2)
        except StructuralError:
            continue
        inc = vals[:, j2] - vals[:, j1]
        n = inc.size
        m2 = float(inc.var(ddof=1))
        se = float(np.sqrt(np.mean((inc - inc.mean()) ** 4) - m2 * m2) / np.sqrt(n))
        sim = xiT_simulation_variance(t1, t2, cfg)
        cont = xiT_increment_variance(t1, t2, cfg.T, cfg.alpha)
        res.append(_check(f"var_sim({t1:g},{t2:g})", sim, m2, se, abs(m2 - sim) <= args.nsigma * se))
        res.append(_check(f"var_limit({t1:g},{t2:g})", cont, m2, se,
                          abs(m2 - cont) <= args.nsigma * se and abs(m2 / cont - 1) <= 0.10))
    if not res:
        raise StructuralError("ensemble grid contains none of the times 0, 0.5, 1")
    return res


def verify_depexp(args):
    H = args.H
    R = unit_R(H, args.kmax)
    radius, _ = admissible_radius(H, args.s, args.t, args.kmax, R)
    z1 = args.z1 if args.z1 is not None else radius / 4
    z2 = args.z2 if args.z2 is not None else radius / 4
    taus = tuple(np.geomspace(args.tau_min, args.tau_max, args.n_tau))
    req = CodifferenceRequest(H, z1, z2, args.s, args.t, taus, args.kmax)
    rep = dependence_exponent(req, R=R)
    report = {"H": H, "z1": z1, "z2": z2, "s": args.s, "t": args.t, "kmax": args.kmax,
              "tau": list(taus), "D": rep["D"].tolist(), "slope": rep["slope"],
              "exponent": rep["exponent"], "slope_ci": list(rep["slope_ci"]),
              "admissible_radius": radius}
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2, default=_json_default)
    target = 2 - 2 * H
    return [_check("dependence_exponent", target, rep["exponent"],
                   (rep["slope_ci"][1] - rep["slope_ci"][0]) / 4,
                   abs(rep["exponent"] - target) <= 0.05, slope=rep["slope"], report=report)]


_VERIFY = {"covariance": verify_covariance, "selfsim": verify_selfsim, "cumulants": verify_cumulants,
           "particle": verify_particle, "depexp": verify_depexp}


def cmd_verify(args, out):
    res = _VERIFY[args.suite](args)
    json.dump(res, out, indent=2, default=_json_default)
    out.write("\n")
    return 0 if all(r["pass"] for r in res) else 1


# ---------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="rosenblatt", description="Rosenblatt process simulation and verification")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate sample paths as CSV")
    s.add_argument("--method", choices=["donsker", "spectral", "particle"])
    s.add_argument("--H", type=float)
    s.add_argument("--alpha", type=float)
    s.add_argument("--paths", type=int)
    s.add_argument("--t-grid", dest="t_grid")
    s.add_argument("--variant", choices=["standard", "sub"])
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--threads", type=int)
    s.add_argument("--config")
    s.add_argument("--n", type=int, help="Donsker sequence length")
    s.add_argument("--rescale", action="store_const", const=True,
                   help="Donsker: divide by the exact pre-limit standard deviation")
    s.add_argument("--T", type=float)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--L", type=float)
    s.add_argument("--particle-method", dest="particle_method", choices=["exact", "window"])
    s.add_argument("--lambda-max", dest="lambda_max", type=float)
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle", help="closed-form and quadrature oracles")
    o.add_argument("kind", choices=["r2", "kappa", "xiT-var", "ilt-l2", "K"])
    o.add_argument("--H", type=float, default=0.75)
    o.add_argument("--k", type=int, default=2)
    o.add_argument("--t", type=float, default=1.0)
    o.add_argument("--theta", type=float, default=1.0)
    o.add_argument("--method", default="auto", choices=["auto", "exact", "mc"])
    o.add_argument("--samples", type=int, default=1 << 20)
    o.add_argument("--alpha", type=float, default=0.75)
    o.add_argument("--T", type=float, default=1.0)
    o.add_argument("--t1", type=float, default=0.0)
    o.add_argument("--t2", type=float, default=1.0)
    o.add_argument("--variant", default="standard", choices=["standard", "sub"])
    o.add_argument("--a", type=float, default=0.0)
    o.add_argument("--b", type=float, default=1.0)
    o.add_argument("--epsilon", type=float)
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("verify", help="statistical checks against the oracles")
    v.add_argument("suite", choices=sorted(_VERIFY))
    v.add_argument("--in", dest="input")
    v.add_argument("--H", type=float, default=0.75)
    v.add_argument("--alpha", type=float)
    v.add_argument("--T", type=float)
    v.add_argument("--epsilon", type=float)
    v.add_argument("--dt", type=float)
    v.add_argument("--variant", default="standard", choices=["standard", "sub"])
    v.add_argument("--t", type=float, default=1.0)
    v.add_argument("--c", type=float, default=4.0)
    v.add_argument("--s", type=float, default=0.0)
    v.add_argument("--nsigma", type=float, default=3.0)
    v.add_argument("--samples", type=int, default=1 << 20)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--z1", type=float)
    v.add_argument("--z2", type=float)
    v.add_argument("--kmax", type=int, default=6)
    v.add_argument("--tau-min", dest="tau_min", type=float, default=1e2)
    v.add_argument("--tau-max", dest="tau_max", type=float, default=1e4)
    v.add_argument("--n-tau", dest="n_tau", type=int, default=9)
    v.add_argument("--report")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except RosenblattError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError:
        print("error: out of memory", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

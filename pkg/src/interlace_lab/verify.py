"""Statistical verification harness and the named suites.

Every suite returns a list of :class:`TestReport` rows.  A row passes when
its statistic is at most its threshold and the sample size clears the
suite's power guard; rows below the guard are marked inconclusive and do not
pass.  Negative controls are rows of their own.  They record
``statistic = -observed`` and ``threshold = -required`` so that the same
"statistic <= threshold" rule means "the control was detected".

Monte-Carlo work is split into fixed-size chunks.  Chunk ``i`` draws from
``seed_split(seed, stream_base + i)``, so results depend on the seed and the
configuration only, never on the number of workers.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from . import core, links, matrix, multilevel, pde, rmt, sde
from .core import HPParams

# ---------------------------------------------------------------- primitives


def seed_split(master: int, stream_index: int) -> np.random.Generator:
    """Independent generator for ``stream_index`` derived from ``master``.

    Uses numpy's SeedSequence spawn keys, which hash (master, index) into a
    fresh PCG64 state.  Equal arguments give identical streams.
    """
    if master < 0 or stream_index < 0:
        raise ValueError("seed and stream index must be nonnegative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master), spawn_key=(int(stream_index),))))


def ks_two_sample(a, b) -> float:
    """Sup-norm distance between the empirical CDFs of ``a`` and ``b``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_two_sample needs two nonempty samples")
    return float(stats.ks_2samp(a, b).statistic)


def ks_null_quantile(n: int, m: int | None = None, q: float = 0.99) -> float:
    """Asymptotic q-quantile of the KS statistic under the null (one-sample if ``m`` is None)."""
    eff = n if m is None else n * m / (n + m)
    return float(stats.kstwobign.ppf(q) / math.sqrt(eff))


def mc_mean_with_se(draws):
    """Sample mean and its standard error (sample std / sqrt(n))."""
    d = np.asarray(draws, dtype=float).ravel()
    if d.size == 0:
        raise ValueError("no draws")
    if d.size == 1:
        return float(d[0]), 0.0
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size))


@dataclass
class TestReport:
    """One verification row.  ``status`` is "pass", "fail" or "inconclusive"."""

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    threshold: float
    n_samples: int
    seed: int
    passed: bool
    details: dict = field(default_factory=dict)
    status: str = "pass"

    def to_dict(self) -> dict:
        det = dict(self.details)
        det["status"] = self.status
        return {
            "name": self.name,
            "statistic": float(self.statistic),
            "threshold": float(self.threshold),
            "n_samples": int(self.n_samples),
            "seed": int(self.seed),
            "pass": bool(self.passed),
            "details": json.dumps(_jsonable(det), sort_keys=True),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def make_report(name, statistic, threshold, n_samples, seed, details=None, min_samples: int = 0) -> TestReport:
    """Row with the pass rule and the power guard applied."""
    statistic = float(statistic)
    threshold = float(threshold)
    if n_samples < min_samples:
        status = "inconclusive"
    else:
        status = "pass" if statistic <= threshold else "fail"
    det = dict(details or {})
    if min_samples:
        det["min_samples"] = min_samples
    return TestReport(name, statistic, threshold, int(n_samples), int(seed), status == "pass", det, status)


def control_report(name, observed, required, n_samples, seed, details=None, min_samples: int = 0) -> TestReport:
    """Negative-control row: passes when ``observed >= required``."""
    det = dict(details or {})
    det.update({"negative_control": True, "observed": float(observed), "required": float(required)})
    return make_report(name, -float(observed), -float(required), n_samples, seed, det, min_samples)


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


# ---------------------------------------------------------------- chunked execution

def _call(task):
    fn, index, size, seed, args = task
    return fn(seed_split(seed, index), size, *args)


def map_chunks(fn, total: int, chunk: int, seed: int, workers: int = 1, stream_base: int = 0, args=()):
    """Run ``fn(rng, size, *args)`` over chunks covering ``total`` draws, in chunk order."""
    total = int(total)
    chunk = max(1, int(chunk))
    sizes = [min(chunk, total - k) for k in range(0, total, chunk)]
    tasks = [(fn, stream_base + i, s, seed, tuple(args)) for i, s in enumerate(sizes)]
    if workers <= 1 or len(tasks) <= 1:
        return [_call(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        return list(ex.map(_call, tasks))


def _cat(parts, k=None):
    if k is None:
        return np.concatenate(parts, axis=0)
    return np.concatenate([p[k] for p in parts], axis=0)


def _max_ks(a, b):
    a = np.atleast_2d(np.asarray(a).T).T if np.ndim(a) == 1 else np.asarray(a)
    b = np.atleast_2d(np.asarray(b).T).T if np.ndim(b) == 1 else np.asarray(b)
    ks = [ks_two_sample(a[:, j], b[:, j]) for j in range(a.shape[1])]
    return max(ks), ks


# ---------------------------------------------------------------- configuration

COMMON = {"seed": 0, "workers": 1, "controls": True}

DEFAULTS = {
    "eigenfunction": {"n_max": 6, "points": 100, "s_values": "0:0,-0.4:0,2:3", "min_gap": 0.05,
                      "threshold": 1e-9},
    "invariance": {"N": 4, "paths": 100_000, "T": 0.5, "dt_base": 1e-3, "threshold": 0.015, "min_samples": 1000,
                   "chunk": 25_000, "control_paths": 20_000, "control_s_re": 1.0, "control_min": 0.05},
    "intertwining-mc": {"paths": 1_000_000, "t": 0.25, "dt_base": 1e-3, "x": "-1,0.5,2", "threshold": 3.0,
                        "min_samples": 1000, "chunk": 100_000, "control_paths": 100_000, "control_min": 5.0},
    "coherency": {"draws": 100_000, "N": 3, "threshold": 0.01, "min_samples": 1000, "chunk": 50_000,
                  "control_min": 0.05},
    "boundary-coherency": {"draws": 100_000, "gamma2": 1.0, "alpha1": 1.0, "threshold": 0.01,
                           "min_samples": 1000, "chunk": 50_000, "control_min": 0.05},
    "duality": {"n": 2, "x": 0.5, "y": -0.3, "t": 0.2, "paths": 1_000_000, "dt_base": 1e-3, "threshold_z": 3.0,
                "threshold_pde": 1e-3, "h": 0.01, "refine": "0.04,0.02,0.01", "ratio_max": 0.9,
                "min_samples": 1000, "chunk": 200_000, "control_paths": 100_000, "control_min_z": 5.0,
                "control_min_pde": 1e-2},
    "eq26": {"t": 0.2, "threshold": 5e-3, "refine": "0.04,0.02,0.01", "ratio_max": 0.9, "control_min": 5e-2},
    "block-kernel": {"t": 0.2, "threshold": 1e-2, "refine": "0.04,0.02,0.01", "ratio_max": 0.9,
                     "control_min": 2e-2},
    "h-transform": {"t": 0.2, "N": 1, "threshold": 1e-3, "refine": "0.04,0.02,0.01", "ratio_max": 0.9,
                    "control_min": 1e-2},
    "gibbs": {"N": 2, "T": 0.25, "samples": 10_000, "dt_base": 1e-3, "threshold": 0.02, "ref_paths": 100_000,
              "min_samples": 1000, "control_min": 0.1},
    "boundary-dbm": {"N": 200, "times": "0.25,0.5,1", "paths": 1, "gap_coef": sde.GAP_COEF, "threshold": None,
                     "control_min": None},
    "boundary-ou": {"N": 200, "c": 0.5, "x0": 2.0, "times": "0.25,0.5,1", "paths": 1, "gap_coef": sde.GAP_COEF,
                    "threshold": None, "control_min": None},
    "matrix-vs-vector": {"N": 3, "t": 0.25, "T_stationary": 0.5, "paths": 100_000, "dt_matrix": 5e-4,
                         "dt_vector": 1e-3, "lam0": "-1,0.2,1.5", "threshold": 0.02, "min_samples": 1000,
                         "chunk": 25_000, "arbitration_paths": 200_000, "arbitration_T": 0.5,
                         "arbitration_dt": 1e-3, "threshold_z": 3.0, "control_paths": 20_000,
                         "control_min": 0.05, "control_min_z": 5.0},
    "cue": {"N": 4, "T": 0.5, "paths": 100_000, "dt_base": 1e-3, "threshold": 0.015, "N_modes": 2, "t_modes": 0.25,
            "theta0": "-1,1.5", "threshold_modes": 0.02, "min_samples": 1000, "chunk": 25_000,
            "control_paths": 20_000, "control_s_im": 1.0, "control_min": 0.05},
    "approximation": {"Ns": "25,50,100,200", "draws": 2000, "threshold": None, "chunk": 1000},
    "pushblock": {"n": 2, "u": -1.5, "u2": -1.5, "v": 0.5, "v2": 0.5, "Ms": "100,400", "T": 0.25, "x0": 0.5,
                  "paths": 4000, "threshold_z": 3.0, "min_samples": 500, "ratio_max": 0.9},
}

SUITE_NAMES = tuple(DEFAULTS)
_NONNEG = {"seed"}
_POSITIVE = {"paths", "draws", "samples", "T", "t", "dt_base", "dt_matrix", "dt_vector", "h", "N", "n", "n_max",
             "points", "chunk", "min_gap", "ref_paths", "control_paths", "arbitration_paths", "arbitration_T",
             "arbitration_dt", "gap_coef", "c", "workers", "T_stationary", "N_modes", "t_modes"}


def _coerce(key, value, default):
    if isinstance(default, bool):
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"{key}: expected a boolean, got {value!r}")
        return bool(value)
    if isinstance(default, int):
        try:
            f = float(value)
        except (TypeError, ValueError):
            raise ValueError(f"{key}: expected an integer, got {value!r}") from None
        if f != int(f):
            raise ValueError(f"{key}: expected an integer, got {value!r}")
        return int(f)
    if isinstance(default, float) or default is None:
        if value is None:
            return None
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ValueError(f"{key}: expected a number, got {value!r}") from None
    return str(value)


def resolve_config(name: str, config: dict | None = None) -> dict:
    """Suite defaults overlaid with ``config``; unknown keys and bad values raise ValueError."""
    if name not in DEFAULTS:
        raise ValueError(f"unknown suite {name!r}; expected one of {', '.join(SUITE_NAMES)}")
    base = {**COMMON, **DEFAULTS[name]}
    out = dict(base)
    for k, v in (config or {}).items():
        if k not in base:
            raise ValueError(f"unknown key {k!r} for suite {name!r}")
        out[k] = _coerce(k, v, base[k])
    for k, v in out.items():
        if v is None or isinstance(v, (bool, str)):
            continue
        if k in _POSITIVE and not v > 0:
            raise ValueError(f"{k} must be positive")
        if k in _NONNEG and v < 0:
            raise ValueError(f"{k} must be nonnegative")
    return out


def _floats(text) -> list:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _svalues(text) -> list:
    out = []
    for item in str(text).split(","):
        re_, _, im = item.partition(":")
        out.append((float(re_), float(im or 0.0)))
    return out


# ---------------------------------------------------------------- chunk workers (top level for pickling)

def _w_invariance(rng, size, N, T, dt, s_re):
    x0 = links.hp_sample(HPParams(0.0, 0.0, N), "cue-cayley", rng, size)
    x1 = sde.simulate(sde.SDESystemSpec("hp", HPParams(s_re, 0.0, N), dt_base=dt), x0, T, rng).final
    return x0, x1


def _gauss(y):
    return np.exp(-np.sum(y * y, axis=-1))


def _w_intertwining(rng, size, x, t, dt, link):
    x = np.asarray(x)
    N = x.size
    X = sde.simulate(sde.SDESystemSpec("hp", HPParams(0.0, 0.0, N), dt_base=dt), np.broadcast_to(x, (size, N)),
                     t, rng).final
    a = _gauss(links.link_sample(X, rng))
    if link == "exact":
        y0 = links.link_sample(x, rng, size=size)
    else:  # wrong link: midpoints of the gaps
        y0 = np.broadcast_to(0.5 * (x[:-1] + x[1:]), (size, N - 1)).copy()
    b = _gauss(sde.simulate(sde.SDESystemSpec("hp", HPParams(0.0, 0.0, N - 1), dt_base=dt), y0, t, rng).final)
    return np.array([a.sum(), (a * a).sum(), b.sum(), (b * b).sum(), size])


def _w_coherency(rng, size, N):
    top = links.hp_sample(HPParams(0.0, 0.0, N), "cue-cayley", rng, size)
    # the wrong link keeps the N - 1 smallest points
    return (links.link_sample(top, rng), links.hp_sample(HPParams(0.0, 0.0, N - 1), "cue-cayley", rng, size),
            top[:, :-1])


def _w_boundary_coherency(rng, size, g2, a1):
    omega = core.OmegaPoint.from_gamma2(alpha_plus=(a1,), gamma2=g2)
    direct = links.boundary_link_sample(omega, 1, rng, size)
    two = links.boundary_link_sample(omega, 2, rng, size)
    return direct, links.link_sample(two, rng), 0.5 * (two[:, :1] + two[:, 1:])


def _w_siegmund(rng, size, n, x, y, t, dt, dual_level):
    p = HPParams()
    a = sde.simulate(sde.SDESystemSpec("hp-1d", p, level=n, dt_base=dt), np.full((size, 1), y), t, rng).final[:, 0]
    b = sde.simulate(sde.SDESystemSpec("hp-dual-1d", p, level=dual_level, dt_base=dt), np.full((size, 1), x), t,
                     rng).final[:, 0]
    return np.array([np.sum(a <= x), np.sum(b >= y), size])


def _w_matrix(rng, size, N, t, dt, lam0, linear_coef):
    p = HPParams(0.0, 0.0, N)
    U = rmt.haar_unitary(N, rng, size)
    X0 = (U * np.asarray(lam0)[None, None, :]) @ np.conj(np.swapaxes(U, -1, -2))
    spec = matrix.MatrixSDESpec(N, p, dt_base=dt, linear_coef=linear_coef)
    return matrix.matrix_simulate(spec, X0, t, rng).eigenvalues[-1]


def _w_matrix_stationary(rng, size, N, T, dt):
    p = HPParams(0.0, 0.0, N)
    X0 = matrix.matrix_hp_sample(p, rng, size, "cayley")
    path = matrix.matrix_simulate(matrix.MatrixSDESpec(N, p, dt_base=dt), X0, T, rng)
    return path.eigenvalues[0], path.eigenvalues[-1]


def _w_vector(rng, size, N, t, dt, lam0):
    spec = sde.SDESystemSpec("hp", HPParams(0.0, 0.0, N), dt_base=dt)
    return sde.simulate(spec, np.broadcast_to(np.asarray(lam0), (size, N)).copy(), t, rng).final


def _w_circle(rng, size, N, T, dt, s_im):
    th0 = links.cue_sample(N, rng, size)
    th1 = sde.simulate(sde.SDESystemSpec("circle", HPParams(0.0, s_im, N), dt_base=dt), th0, T, rng).final
    return th0, th1


def _w_circle_mode(rng, size, theta0, t, dt, mode):
    th0 = np.broadcast_to(np.asarray(theta0), (size, len(theta0))).copy()
    spec = sde.SDESystemSpec("circle", HPParams(0.0, 0.0, len(theta0)), dt_base=dt, circle_mode=mode)
    return sde.simulate(spec, th0, t, rng).final


def _w_embedded_hp(rng, size, N):
    x = links.hp_sample(HPParams(0.0, 0.0, N), "cue-cayley", rng, size)
    e = core.embed_batch(x)
    return np.column_stack([e["gamma1"], e["delta"], e["alpha_plus1"], e["alpha_minus1"]])


# ---------------------------------------------------------------- PDE grid cache

@lru_cache(maxsize=32)
def _grid(n: int, dual: bool, t: float, h: float) -> pde.DensityGrid:
    return pde.solve_density(n, HPParams(), dual, t, pde.GridConfig(h=h))


def _refinement_rows(name, fn, cfg, threshold, seed):
    hs = _floats(cfg["refine"])
    gaps = [fn(h) for h in hs]
    ratios = [b / a for a, b in zip(gaps, gaps[1:])] if len(gaps) > 1 else [0.0]
    det = {"h": hs, "gaps": gaps, "t": cfg["t"]}
    rows = [make_report(name, gaps[-1], threshold, len(hs), seed, det)]
    rows.append(make_report(f"{name}:refinement", max(ratios), cfg["ratio_max"], len(hs), seed,
                            {"h": hs, "gaps": gaps, "ratios": ratios}))
    return rows


# ---------------------------------------------------------------- suites

def _suite_eigenfunction(cfg):
    seed = cfg["seed"]
    rng = seed_split(seed, 0)
    worst = 0.0
    per = {}
    count = 0
    for s_re, s_im in _svalues(cfg["s_values"]):
        for N in range(1, cfg["n_max"] + 1):
            p = HPParams(s_re, s_im, N)
            r = 0.0
            for _ in range(cfg["points"]):
                x = np.sort(rng.uniform(-3.0, 3.0, N))
                while N > 1 and np.min(np.diff(x)) < cfg["min_gap"]:
                    x = np.sort(rng.uniform(-3.0, 3.0, N))
                r = max(r, sde.eigenfunction_check(N, p, x))
                count += 1
            per[f"N={N},s={s_re}+{s_im}i"] = r
            worst = max(worst, r)
    return [make_report("eigenfunction", worst, cfg["threshold"], count, seed, {"max_residual": per})]


def _suite_invariance(cfg):
    seed, w = cfg["seed"], cfg["workers"]
    parts = map_chunks(_w_invariance, cfg["paths"], cfg["chunk"], seed, w, 0,
                       (cfg["N"], cfg["T"], cfg["dt_base"], 0.0))
    stat, ks = _max_ks(_cat(parts, 0), _cat(parts, 1))
    rows = [make_report("invariance", stat, cfg["threshold"], cfg["paths"], seed,
                        {"per_coordinate_ks": ks, "N": cfg["N"], "T": cfg["T"], "dt_base": cfg["dt_base"]},
                        cfg["min_samples"])]
    if cfg["controls"]:
        parts = map_chunks(_w_invariance, cfg["control_paths"], cfg["chunk"], seed, w, 10_000,
                           (cfg["N"], cfg["T"], cfg["dt_base"], cfg["control_s_re"]))
        c, cks = _max_ks(_cat(parts, 0), _cat(parts, 1))
        rows.append(control_report("invariance:control-perturbed-s", c, cfg["control_min"], cfg["control_paths"],
                                   seed, {"s_re": cfg["control_s_re"], "per_coordinate_ks": cks}))
    return rows


def _z_from_sums(tot):
    sa, saa, sb, sbb, n = tot
    ma, mb = sa / n, sb / n
    va = (saa - n * ma * ma) / (n - 1)
    vb = (sbb - n * mb * mb) / (n - 1)
    se = math.sqrt(max(va, 0.0) / n + max(vb, 0.0) / n)
    return ma, mb, se, (abs(ma - mb) / se if se > 0 else 0.0)


def _suite_intertwining(cfg):
    seed, w = cfg["seed"], cfg["workers"]
    x = _floats(cfg["x"])
    tot = sum(map_chunks(_w_intertwining, cfg["paths"], cfg["chunk"], seed, w, 0,
                         (x, cfg["t"], cfg["dt_base"], "exact")))
    ma, mb, se, z = _z_from_sums(tot)
    rows = [make_report("intertwining-mc", z, cfg["threshold"], cfg["paths"], seed,
                        {"lhs": ma, "rhs": mb, "combined_se": se, "x": x, "t": cfg["t"], "dt_base": cfg["dt_base"]},
                        cfg["min_samples"])]
    if cfg["controls"]:
        tot = sum(map_chunks(_w_intertwining, cfg["control_paths"], cfg["chunk"], seed, w, 10_000,
                             (x, cfg["t"], cfg["dt_base"], "midpoint")))
        ma, mb, se, zc = _z_from_sums(tot)
        rows.append(control_report("intertwining-mc:control-wrong-link", zc, cfg["control_min"],
                                   cfg["control_paths"], seed, {"lhs": ma, "rhs": mb, "combined_se": se}))
    return rows


def _suite_coherency(cfg):
    seed, w = cfg["seed"], cfg["workers"]
    parts = map_chunks(_w_coherency, cfg["draws"], cfg["chunk"], seed, w, 0, (cfg["N"],))
    proj, direct, mid = _cat(parts, 0), _cat(parts, 1), _cat(parts, 2)
    stat, ks = _max_ks(proj, direct)
    rows = [make_report("coherency", stat, cfg["threshold"], cfg["draws"], seed,
                        {"per_coordinate_ks": ks, "N": cfg["N"]}, cfg["min_samples"])]
    if cfg["controls"]:
        c, cks = _max_ks(mid, direct)
        rows.append(control_report("coherency:control-wrong-link", c, cfg["control_min"], cfg["draws"], seed,
                                   {"per_coordinate_ks": cks}))
    return rows


def _suite_boundary_coherency(cfg):
    seed, w = cfg["seed"], cfg["workers"]
    parts = map_chunks(_w_boundary_coherency, cfg["draws"], cfg["chunk"], seed, w, 0,
                       (cfg["gamma2"], cfg["alpha1"]))
    direct, composed, mid = _cat(parts, 0), _cat(parts, 1), _cat(parts, 2)
    stat, _ = _max_ks(direct, composed)
    det = {"gamma2": cfg["gamma2"], "alpha_plus1": cfg["alpha1"]}
    rows = [make_report("boundary-coherency", stat, cfg["threshold"], cfg["draws"], seed, det, cfg["min_samples"])]
    if cfg["controls"]:
        c, _ = _max_ks(direct, mid)
        rows.append(control_report("boundary-coherency:control-wrong-link", c, cfg["control_min"], cfg["draws"],
                                   seed, det))
    return rows


def _suite_duality(cfg):
    seed, w = cfg["seed"], cfg["workers"]
    n, t = cfg["n"], cfg["t"]
    args = (n, cfg["x"], cfg["y"], t, cfg["dt_base"])
    ca, cb, m = sum(map_chunks(_w_siegmund, cfg["paths"], cfg["chunk"], seed, w, 0, args + (n,)))
    pa, pb = ca / m, cb / m
    se = math.sqrt(pa * (1 - pa) / m + pb * (1 - pb) / m)
    z = abs(pa - pb) / se if se > 0 else 0.0
    rows = [make_report("duality-mc", z, cfg["threshold_z"], cfg["paths"], seed,
                        {"lhs": pa, "rhs": pb, "combined_se": se, "x": cfg["x"], "y": cfg["y"], "t": t, "n": n},
                        cfg["min_samples"])]

    def gap(h):
        return pde.check_siegmund_pde(n, HPParams(), t, primal=_grid(n, False, t, h), dual=_grid(n, True, t, h)).gap

    rows += _refinement_rows("duality-pde", gap, cfg, cfg["threshold_pde"], seed)
    if cfg["controls"]:
        ca, cb, m = sum(map_chunks(_w_siegmund, cfg["control_paths"], cfg["chunk"], seed, w, 10_000, args + (n + 1,)))
        pa, pb = ca / m, cb / m
        se = math.sqrt(pa * (1 - pa) / m + pb * (1 - pb) / m)
        rows.append(control_report("duality-mc:control-wrong-level", abs(pa - pb) / se, cfg["control_min_z"],
                                   cfg["control_paths"], seed, {"dual_level": n + 1, "lhs": pa, "rhs": pb}))
        h = _floats(cfg["refine"])[0]
        g = pde.check_siegmund_pde(n, HPParams(), t, primal=_grid(n, False, t, h), dual=_grid(n + 1, True, t, h)).gap
        rows.append(control_report("duality-pde:control-wrong-level", g, cfg["control_min_pde"], 1, seed,
                                   {"dual_level": n + 1, "h": h}))
    return rows


def _suite_eq26(cfg):
    t = cfg["t"]

    def gap(h):
        return pde.check_intermediate_intertwining(t, primal=_grid(2, False, t, h), dual=_grid(2, True, t, h)).gap

    rows = _refinement_rows("eq26", gap, cfg, cfg["threshold"], cfg["seed"])
    if cfg["controls"]:
        h = _floats(cfg["refine"])[0]
        g = pde.check_intermediate_intertwining(t, primal=_grid(2, False, t, h), dual=_grid(3, True, t, h)).gap
        rows.append(control_report("eq26:control-wrong-level", g, cfg["control_min"], 1, cfg["seed"],
                                   {"dual_level": 3, "h": h}))
    return rows


def _suite_block_kernel(cfg):
    t = cfg["t"]

    def gap(h):
        return pde.check_block_kernel(t, primal=_grid(2, False, t, h), dual=_grid(2, True, t, h)).gap

    rows = _refinement_rows("block-kernel", gap, cfg, cfg["threshold"], cfg["seed"])
    if cfg["controls"]:
        h = _floats(cfg["refine"])[0]
        g = pde.check_block_kernel(t, primal=_grid(2, False, t, h), dual=_grid(3, True, t, h)).gap
        rows.append(control_report("block-kernel:control-wrong-level", g, cfg["control_min"], 1, cfg["seed"],
                                   {"dual_level": 3, "h": h}))
    return rows


def _suite_h_transform(cfg):
    t, N = cfg["t"], cfg["N"]

    def gap(h):
        return pde.check_h_transform(t, N, config=pde.GridConfig(h=h), primal=_grid(N, False, t, h),
                                     dual=_grid(N + 1, True, t, h)).gap

    rows = _refinement_rows("h-transform", gap, cfg, cfg["threshold"], cfg["seed"])
    if cfg["controls"]:
        h = _floats(cfg["refine"])[0]
        g = pde.check_h_transform(t, N, config=pde.GridConfig(h=h), primal=_grid(N, False, t, h),
                                  dual=_grid(N + 1, True, t, h), constant=0.0).gap
        rows.append(control_report("h-transform:control-no-prefactor", g, cfg["control_min"], 1, cfg["seed"],
                                   {"h": h}))
    return rows


def _suite_gibbs(cfg):
    seed = cfg["seed"]
    N, T = cfg["N"], cfg["T"]
    p = HPParams(0.0, 0.0, N)
    spec = multilevel.ReflectedSpec(p, dt_base=cfg["dt_base"])
    chk = multilevel.gibbs_propagation_check(spec, T, cfg["samples"], seed_split(seed, 0))
    ref = _w_vector_from_law(seed_split(seed, 1), cfg["ref_paths"], N, T, cfg["dt_base"])
    mstat, mks = _max_ks(chk.top, ref)
    rows = [
        make_report("gibbs:level-marginal", mstat, cfg["threshold"], chk.n_samples, seed,
                    {"per_coordinate_ks": mks, "reference_paths": cfg["ref_paths"], "N": N, "T": T},
                    cfg["min_samples"]),
        make_report("gibbs:conditional-uniformity", chk.statistic, cfg["threshold"], chk.n_samples, seed,
                    {"per_coordinate_ks": chk.per_coordinate, "stopped": chk.n_stopped, "N": N, "T": T},
                    cfg["min_samples"]),
    ]
    if cfg["controls"]:
        ctl = multilevel.gibbs_propagation_check(spec, T, cfg["samples"], seed_split(seed, 2), control="decoupled")
        rows.append(control_report("gibbs:control-frozen-level", ctl.statistic, cfg["control_min"], ctl.n_samples,
                                   seed, {"control": "decoupled", "per_coordinate_ks": ctl.per_coordinate}))
    return rows


def _w_vector_from_law(rng, size, N, T, dt):
    x0 = links.hp_sample(HPParams(0.0, 0.0, N), "cue-cayley", rng, size)
    return sde.simulate(sde.SDESystemSpec("hp", HPParams(0.0, 0.0, N), dt_base=dt), x0, T, rng).final


def _boundary_tol(cfg):
    return cfg["threshold"] if cfg["threshold"] is not None else 5.0 / math.sqrt(cfg["N"])


def _suite_boundary_dbm(cfg):
    seed = cfg["seed"]
    N = cfg["N"]
    tol = _boundary_tol(cfg)
    times = sorted(_floats(cfg["times"]))
    spec = sde.SDESystemSpec("dbm", HPParams(0.0, 0.0, N), gap_coef=cfg["gap_coef"])
    rec = sde.hp_start_degenerate(spec, np.zeros((cfg["paths"], N)), times[-1], seed_split(seed, 0),
                                  record_times=times[:-1])
    e = core.embed_batch(rec.states)
    idx = [int(np.argmin(np.abs(rec.times - t))) for t in times]
    shift = [float(np.mean(e["delta"][k] - e["delta"][0])) for k in idx]
    dgap = [abs(s - t) for s, t in zip(shift, times)]
    amax = [float(np.mean(np.maximum(e["alpha_plus1"][k], e["alpha_minus1"][k]))) for k in idx]
    stat = max(max(dgap), max(amax))
    rows = [make_report("boundary-dbm", stat, tol, cfg["paths"], seed,
                        {"times": times, "delta_shift": shift, "delta_gap": dgap, "max_alpha": amax, "N": N,
                         "tolerance": "5/sqrt(N)"})]
    if cfg["controls"]:
        # independent Brownian motions: the Gaussian component barely grows
        rng = seed_split(seed, 1)
        x = np.sqrt(times[-1]) * rng.standard_normal((cfg["paths"], N))
        d = float(np.mean(core.embed_batch(x)["delta"]))
        cmin = cfg["control_min"] if cfg["control_min"] is not None else tol
        rows.append(control_report("boundary-dbm:control-no-interaction", abs(d - times[-1]), cmin, cfg["paths"],
                                   seed, {"delta_shift": d, "t": times[-1]}))
    return rows


def _suite_boundary_ou(cfg):
    seed = cfg["seed"]
    N, c, x0 = cfg["N"], cfg["c"], cfg["x0"]
    tol = _boundary_tol(cfg)
    times = sorted(_floats(cfg["times"]))
    spec = sde.SDESystemSpec("ou", HPParams(0.0, 0.0, N), c=c, gap_coef=cfg["gap_coef"])
    rec = sde.hp_start_degenerate(spec, np.full((cfg["paths"], N), x0), times[-1], seed_split(seed, 0),
                                  record_times=times[:-1])
    e = core.embed_batch(rec.states)
    om0 = core.embed(np.full(N, x0))
    gaps = {"gamma1": [], "delta": [], "alpha_plus1": [], "alpha_minus1": []}
    for t in times:
        k = int(np.argmin(np.abs(rec.times - t)))
        fl = sde.ou_boundary_flow(om0, t, c)
        gaps["gamma1"].append(abs(float(np.mean(e["gamma1"][k])) - fl.gamma1))
        gaps["delta"].append(abs(float(np.mean(e["delta"][k])) - fl.delta))
        gaps["alpha_plus1"].append(abs(float(np.mean(e["alpha_plus1"][k])) - (fl.alpha_plus or (0.0,))[0]))
        gaps["alpha_minus1"].append(abs(float(np.mean(e["alpha_minus1"][k])) - (fl.alpha_minus or (0.0,))[0]))
    stat = max(max(v) for v in gaps.values())
    rows = [make_report("boundary-ou", stat, tol, cfg["paths"], seed,
                        {"times": times, "gaps": gaps, "N": N, "c": c, "x0": x0, "tolerance": "5/sqrt(N)"})]
    if cfg["controls"]:
        g1 = float(np.mean(e["gamma1"][-1]))
        cmin = cfg["control_min"] if cfg["control_min"] is not None else tol
        rows.append(control_report("boundary-ou:control-no-decay", abs(g1 - om0.gamma1), cmin, cfg["paths"], seed,
                                   {"gamma1_T": g1, "gamma1_0": om0.gamma1, "prediction": "gamma1 constant"}))
    return rows


def _suite_matrix(cfg):
    seed, w = cfg["seed"], cfg["workers"]
    N, t = cfg["N"], cfg["t"]
    lam0 = _floats(cfg["lam0"])
    if len(lam0) != N:
        raise ValueError("lam0 must have N entries")
    mat = _cat(map_chunks(_w_matrix, cfg["paths"], cfg["chunk"], seed, w, 0,
                          (N, t, cfg["dt_matrix"], lam0, None)))
    vec = _cat(map_chunks(_w_vector, cfg["paths"], cfg["chunk"], seed, w, 1000, (N, t, cfg["dt_vector"], lam0)))
    stat, ks = _max_ks(mat, vec)
    rows = [make_report("matrix-vs-vector", stat, cfg["threshold"], cfg["paths"], seed,
                        {"per_coordinate_ks": ks, "lam0": lam0, "t": t, "dt_matrix": cfg["dt_matrix"],
                         "dt_vector": cfg["dt_vector"]}, cfg["min_samples"])]
    parts = map_chunks(_w_matrix_stationary, cfg["paths"], cfg["chunk"], seed, w, 2000,
                       (N, cfg["T_stationary"], cfg["dt_matrix"]))
    stat, ks = _max_ks(_cat(parts, 0), _cat(parts, 1))
    rows.append(make_report("matrix-stationarity", stat, cfg["threshold"], cfg["paths"], seed,
                            {"per_coordinate_ks": ks, "T": cfg["T_stationary"]}, cfg["min_samples"]))
    arb = matrix.drift_constant_arbitration(HPParams(0.0, 0.0, 1), 1.0, cfg["arbitration_T"],
                                            cfg["arbitration_paths"], seed_split(seed, 3000), cfg["arbitration_dt"])
    best = arb["selected"]
    other = [k for k in arb["z"] if k != best][0]
    rows.append(make_report("matrix-arbitration", arb["z"][best], cfg["threshold_z"], cfg["arbitration_paths"],
                            seed, {"selected": best, **arb}, cfg["min_samples"]))
    if cfg["controls"]:
        rows.append(control_report("matrix-arbitration:control-rejected", arb["z"][other], cfg["control_min_z"],
                                   cfg["arbitration_paths"], seed, {"rejected": other}))
        wrong = 1.0 - N
        cm = _cat(map_chunks(_w_matrix, cfg["control_paths"], cfg["chunk"], seed, w, 4000,
                             (N, t, cfg["dt_matrix"], lam0, wrong)))
        c, cks = _max_ks(cm, vec)
        rows.append(control_report("matrix-vs-vector:control-wrong-constant", c, cfg["control_min"],
                                   cfg["control_paths"], seed, {"linear_coef": wrong, "per_coordinate_ks": cks}))
    return rows


def _suite_cue(cfg):
    seed, w = cfg["seed"], cfg["workers"]
    parts = map_chunks(_w_circle, cfg["paths"], cfg["chunk"], seed, w, 0, (cfg["N"], cfg["T"], cfg["dt_base"], 0.0))
    stat, ks = _max_ks(_cat(parts, 0), _cat(parts, 1))
    rows = [make_report("cue-invariance", stat, cfg["threshold"], cfg["paths"], seed,
                        {"per_coordinate_ks": ks, "N": cfg["N"], "T": cfg["T"]}, cfg["min_samples"])]
    th0 = _floats(cfg["theta0"])
    margs = (th0, cfg["t_modes"], cfg["dt_base"])
    direct = _cat(map_chunks(_w_circle_mode, cfg["paths"], cfg["chunk"], seed, w, 1000, margs + ("direct",)))
    push = _cat(map_chunks(_w_circle_mode, cfg["paths"], cfg["chunk"], seed, w, 2000, margs + ("pushforward",)))
    stat, ks = _max_ks(direct, push)
    rows.append(make_report("cue-modes", stat, cfg["threshold_modes"], cfg["paths"], seed,
                            {"per_coordinate_ks": ks, "theta0": th0, "t": cfg["t_modes"]}, cfg["min_samples"]))
    if cfg["controls"]:
        parts = map_chunks(_w_circle, cfg["control_paths"], cfg["chunk"], seed, w, 3000,
                           (cfg["N"], cfg["T"], cfg["dt_base"], cfg["control_s_im"]))
        c, cks = _max_ks(_cat(parts, 0), _cat(parts, 1))
        rows.append(control_report("cue-invariance:control-perturbed-s", c, cfg["control_min"], cfg["control_paths"],
                                   seed, {"s_im": cfg["control_s_im"], "per_coordinate_ks": cks}))
    return rows


def _suite_approximation(cfg):
    seed, w = cfg["seed"], cfg["workers"]
    Ns = [int(v) for v in _floats(cfg["Ns"])]
    D = cfg["draws"]
    samples = [_cat(map_chunks(_w_embedded_hp, D, cfg["chunk"], seed, w, 1000 * k, (N,))) for k, N in enumerate(Ns)]
    names = ["gamma1", "delta", "alpha_plus1", "alpha_minus1"]
    dists = []
    for a, b in zip(samples, samples[1:]):
        dists.append(dict(zip(names, _max_ks(a, b)[1])))
    seq = [max(d.values()) for d in dists]
    thr = cfg["threshold"] if cfg["threshold"] is not None else 3.0 * ks_null_quantile(D, D)
    return [make_report("approximation", seq[-1], thr, D, seed,
                        {"Ns": Ns, "consecutive_ks": dists, "max_ks": seq,
                         "law": "embedded Hua-Pickrell s=0 (invariant under the diffusion)"})]


def _suite_pushblock(cfg):
    seed = cfg["seed"]
    params = multilevel.PushBlockParams(cfg["u"], cfg["u2"], cfg["v"], cfg["v2"], N=cfg["n"])
    Ms = [int(v) for v in _floats(cfg["Ms"])]
    reps = multilevel.pushblock_scaling_check(params, Ms, cfg["T"], cfg["n"], cfg["x0"], cfg["paths"],
                                              seed_split(seed, 0))
    z = max(max(r.z_mean, r.z_var) for r in reps)
    det = {"M": Ms, "mean": [r.mean for r in reps], "var": [r.var for r in reps],
           "target_mean": reps[0].target_mean, "target_var": reps[0].target_var,
           "z_mean": [r.z_mean for r in reps], "z_var": [r.z_var for r in reps]}
    rows = [make_report("pushblock", z, cfg["threshold_z"], cfg["paths"], seed, det, cfg["min_samples"])]
    errs = [r.exact_error for r in reps]
    ratios = [b / a for a, b in zip(errs, errs[1:])] if len(errs) > 1 else [0.0]
    rows.append(make_report("pushblock:refinement", max(ratios), cfg["ratio_max"], len(Ms), seed,
                            {"M": Ms, "exact_error": errs, "ratios": ratios}))
    return rows


SUITES = {
    "eigenfunction": _suite_eigenfunction,
    "invariance": _suite_invariance,
    "intertwining-mc": _suite_intertwining,
    "coherency": _suite_coherency,
    "boundary-coherency": _suite_boundary_coherency,
    "duality": _suite_duality,
    "eq26": _suite_eq26,
    "block-kernel": _suite_block_kernel,
    "h-transform": _suite_h_transform,
    "gibbs": _suite_gibbs,
    "boundary-dbm": _suite_boundary_dbm,
    "boundary-ou": _suite_boundary_ou,
    "matrix-vs-vector": _suite_matrix,
    "cue": _suite_cue,
    "approximation": _suite_approximation,
    "pushblock": _suite_pushblock,
}


def default_workers() -> int:
    return os.cpu_count() or 1


def suite(name: str, config: dict | None = None) -> list:
    """Run the named suite; ``config`` overrides its defaults (see ``DEFAULTS``)."""
    cfg = resolve_config(name, config)
    return SUITES[name](cfg)


def all_passed(reports) -> bool:
    return all(r.passed for r in reports)


__all__ = [
    "seed_split", "ks_two_sample", "ks_null_quantile", "mc_mean_with_se", "TestReport", "make_report",
    "control_report", "reports_to_json", "map_chunks", "DEFAULTS", "SUITE_NAMES", "resolve_config", "suite",
    "all_passed", "default_workers",
]

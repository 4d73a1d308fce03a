"""Dynamics on interlacing patterns.

Continuous patterns evolve by the reflected system: level n runs the
one-dimensional L^{(n)} diffusion independently per particle and is kept
inside the intervals cut out by level n-1 (reflection after every Euler
step).  Integer patterns evolve by push-block dynamics with quadratic rates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, sparse, stats

from . import kernels, links
from .core import GTPattern, HPParams

COINCIDE_TOL = 1e-12


# ---------------------------------------------------------------- layout helpers

def _offset(n: int) -> int:
    return n * (n - 1) // 2


def flatten_levels(levels) -> np.ndarray:
    """Stack per-level arrays (each (P, n)) into one (P, N(N+1)/2) array."""
    return np.ascontiguousarray(np.concatenate([np.atleast_2d(l) for l in levels], axis=1))


def split_levels(flat, depth: int) -> list:
    flat = np.asarray(flat)
    return [flat[..., _offset(n):_offset(n) + n] for n in range(1, depth + 1)]


def _batch_levels(pattern0):
    if isinstance(pattern0, GTPattern):
        return [l[None, :] for l in pattern0.levels]
    return [np.atleast_2d(np.asarray(l, dtype=float)) for l in pattern0]


def levels_interlace(levels, tol: float = 0.0) -> np.ndarray:
    """Per-path interlacing predicate for batched levels."""
    ok = np.ones(levels[0].shape[0], dtype=bool)
    for n in range(1, len(levels)):
        y, x = levels[n - 1], levels[n]
        ok &= np.all(x[:, :-1] <= y + tol, axis=1) & np.all(y <= x[:, 1:] + tol, axis=1)
    return ok


# ---------------------------------------------------------------- Gibbs measures

def gibbs_sample(bottom_sampler, rng, size=None):
    """Bottom row from ``bottom_sampler(rng, size)``, upper levels uniform given it.

    Returns a :class:`GTPattern` when ``size`` is None, else a list of level
    arrays with shapes (size, n).
    """
    bottom = np.asarray(bottom_sampler(rng, size), dtype=float)
    flat = bottom.reshape(-1, bottom.shape[-1])
    if flat.shape[-1] > 1 and np.any(np.diff(flat, axis=-1) <= 0):
        raise ValueError("bottom_sampler must return strictly ordered points")
    if size is None:
        return links.gt_uniform_sample(bottom.reshape(-1), rng)
    return links.gt_uniform_sample(bottom, rng)


def hp_bottom_sampler(p: HPParams):
    """Sampler of the Hua-Pickrell measure suited for gibbs_sample."""
    method = "cue-cayley" if p.s_re == 0 and p.s_im == 0 else "mh"

    def draw(rng, size):
        return links.hp_sample(p, method, rng, size)

    return draw


# ---------------------------------------------------------------- reflected SDEs

@dataclass(frozen=True)
class ReflectedSpec:
    """Reflected multilevel system with top level N = ``p.N``."""

    p: HPParams
    dt_base: float = 1e-3
    coincide_tol: float = COINCIDE_TOL
    reflection: str = "mirror"

    def __post_init__(self):
        if not self.dt_base > 0:
            raise ValueError("dt_base must be positive")
        if self.reflection not in ("mirror", "project"):
            raise ValueError("reflection must be 'mirror' or 'project'")

    @property
    def depth(self) -> int:
        return self.p.N


@dataclass
class PatternPath:
    """Recorded pattern snapshots.

    ``levels[n-1]`` has shape (K, P, n) for K recorded times.  ``stopped``
    flags paths where two same-level particles met; such paths are frozen
    from ``stop_time`` on.
    """

    times: np.ndarray
    levels: list
    stopped: np.ndarray
    stop_time: np.ndarray
    seed: object = None

    @property
    def depth(self) -> int:
        return len(self.levels)

    def final(self) -> list:
        return [l[-1] for l in self.levels]

    def snapshot(self, k: int, path: int = 0) -> GTPattern:
        return GTPattern([l[k, path] for l in self.levels])

    def to_csv(self, path, path_index: int = 0):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "level", "index", "value"])
            for k, t in enumerate(self.times):
                for n, lev in enumerate(self.levels, start=1):
                    for i in range(n):
                        w.writerow([repr(float(t)), n, i + 1, repr(float(lev[k, path_index, i]))])


def reflected_simulate(spec: ReflectedSpec, pattern0, T: float, rng, record_times=(),
                       frozen_levels=(), seed=None) -> PatternPath:
    """Euler steps kept inside the intervals of the level below.

    ``spec.reflection`` picks mirror reflection of the overshoot (default) or
    clamping onto the barrier.

    ``pattern0`` is a GTPattern or a list of batched levels.  Levels listed in
    ``frozen_levels`` do not move; this breaks the dynamics on purpose and
    exists for negative controls.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    levels = _batch_levels(pattern0)
    depth = len(levels)
    if depth != spec.depth:
        raise ValueError(f"pattern depth {depth} does not match spec depth {spec.depth}")
    if not levels_interlace(levels).all():
        raise ValueError("initial pattern does not interlace")
    if depth > 1 and np.any(np.diff(levels[-1], axis=1) <= 0):
        raise ValueError("top level must be strictly ordered")
    x = flatten_levels(levels).astype(float)
    P = x.shape[0]
    lin = np.array([2.0 - 2.0 * n - 2.0 * spec.p.s_re for n in range(1, depth + 1)])
    const = np.full(depth, 2.0 * spec.p.s_im)
    noise_mask = np.ones(x.shape[1])
    for n in frozen_levels:
        lin[n - 1] = const[n - 1] = 0.0
        noise_mask[_offset(n):_offset(n) + n] = 0.0
    rec_t = np.unique(np.concatenate([[0.0], np.asarray(record_times, dtype=float), [T]]))
    rec_t = rec_t[(rec_t >= 0) & (rec_t <= T)]
    snaps = np.empty((rec_t.size, P, x.shape[1]))
    snaps[0] = x
    stopped = np.zeros(P, dtype=bool)
    stop_time = np.full(P, np.inf)
    t = 0.0
    for k in range(1, rec_t.size):
        target = rec_t[k]
        while t < target - 1e-15 * max(1.0, target):
            dt = min(spec.dt_base, target - t)
            dw = np.sqrt(dt) * rng.standard_normal(x.shape) * noise_mask
            new, stop = kernels.reflected_step(x, np.ascontiguousarray(dw), dt, depth, lin, const,
                                               spec.coincide_tol, int(spec.reflection == "mirror"))
            live = ~stopped
            x[live] = new[live]
            fresh = stop & live
            stopped |= fresh
            stop_time[fresh] = t + dt
            t += dt
        t = target
        snaps[k] = x
    return PatternPath(rec_t, split_levels(snaps, depth), stopped, stop_time, seed)


# ---------------------------------------------------------------- Gibbs checks

def conditional_uniforms(y, x) -> np.ndarray:
    """Rosenblatt transform of level N-1 given level N under the density N! Delta(y)/Delta(x).

    Implemented for N = 2 and N = 3; the returned columns are i.i.d. uniform
    exactly when y is uniform on the interlacing polytope of x.
    """
    y = np.atleast_2d(y)
    x = np.atleast_2d(x)
    N = x.shape[1]
    if N == 2:
        return (y[:, :1] - x[:, :1]) / (x[:, 1:2] - x[:, :1])
    if N == 3:
        x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
        y1, y2 = y[:, 0], y[:, 1]
        delta = (x2 - x1) * (x3 - x1) * (x3 - x2)
        u1 = (x3 - x2) * (y1 - x1) * (x3 + x2 - y1 - x1) / delta
        u2 = ((y2 - y1) ** 2 - (x2 - y1) ** 2) / ((x3 - y1) ** 2 - (x2 - y1) ** 2)
        return np.column_stack([u1, u2])
    raise ValueError("conditional_uniforms is implemented for N in {2, 3}")


@dataclass
class GibbsCheck:
    statistic: float
    per_coordinate: list
    n_samples: int
    n_stopped: int
    details: dict = field(default_factory=dict)
    top: np.ndarray | None = None  # final level-N sample of the kept paths


def gibbs_propagation_check(spec: ReflectedSpec, T: float, samples: int, rng, bottom_sampler=None,
                            control: str | None = None) -> GibbsCheck:
    """Evolve a Gibbs start to time T and test conditional uniformity of level N-1 given level N.

    The statistic is the largest one-sample KS distance to the uniform law
    over the Rosenblatt coordinates.  Stopped paths are excluded and counted.

    ``control`` breaks the dynamics on purpose:

    * ``"decoupled"`` freezes every level below N and moves level N by the
      autonomous interacting SDE, so the levels no longer see each other;
    * ``"frozen"`` freezes level 1 but keeps all reflections.  At N=2 the
      reflection nearly restores uniformity, so this one has little power.
    """
    if spec.depth not in (2, 3):
        raise ValueError("gibbs_propagation_check supports depth 2 or 3")
    if control not in (None, "decoupled", "frozen"):
        raise ValueError(f"unknown control {control!r}")
    sampler = bottom_sampler or hp_bottom_sampler(spec.p)
    levels0 = gibbs_sample(sampler, rng, samples)
    if control == "decoupled":
        from . import sde

        top = sde.simulate(sde.SDESystemSpec("hp", spec.p, dt_base=spec.dt_base), levels0[-1], T, rng).final
        fin = levels0[:-1] + [top]
        keep = np.ones(samples, dtype=bool)
    else:
        path = reflected_simulate(spec, levels0, T, rng, frozen_levels=(1,) if control == "frozen" else ())
        fin = path.final()
        keep = ~path.stopped
    u = conditional_uniforms(fin[-2][keep], fin[-1][keep])
    ks = [float(stats.kstest(u[:, j], "uniform").statistic) for j in range(u.shape[1])]
    return GibbsCheck(max(ks), ks, int(keep.sum()), int((~keep).sum()),
                      {"T": T, "depth": spec.depth, "control": control}, fin[-1][keep])


# ---------------------------------------------------------------- push-block dynamics

@dataclass(frozen=True)
class PushBlockParams:
    """Rates lambda_n(x) = (x-(u+n-1))(x-(u'+n-1)) to the right, mu_n(x) = (x+v)(x+v') to the left.

    Nonnegativity is checked on the integer window [lo, hi] for every level.
    """

    u: float
    u2: float
    v: float
    v2: float
    N: int = 1
    window: tuple = (-10_000, 10_000)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        lo, hi = self.window
        if lo > hi:
            raise ValueError("window must satisfy lo <= hi")
        xs = np.arange(int(lo), int(hi) + 1, dtype=float)
        for n in range(1, self.N + 1):
            bad = np.flatnonzero((self.right_rate(xs, n) < 0) | (self.left_rate(xs) < 0))
            if bad.size:
                raise ValueError(f"negative rate at level {n}, site {int(xs[bad[0]])}; "
                                 "adjust (u, u', v, v') or the window")

    def right_rate(self, x, n: int):
        x = np.asarray(x, dtype=float)
        return (x - (self.u + n - 1)) * (x - (self.u2 + n - 1))

    def left_rate(self, x):
        x = np.asarray(x, dtype=float)
        return (x + self.v) * (x + self.v2)

    @property
    def sigma(self) -> float:
        """u + u' + v + v', which plays the role of 2 Re s in the scaling limit."""
        return self.u + self.u2 + self.v + self.v2

    def prm(self, level_shift: int = 0) -> np.ndarray:
        return np.array([self.u + level_shift, self.u2 + level_shift, self.v, self.v2], dtype=float)


def discrete_interlaces(levels) -> bool:
    for n in range(1, len(levels)):
        y, x = np.asarray(levels[n - 1]), np.asarray(levels[n])
        if not (np.all(x[:-1] <= y) and np.all(y < x[1:])):
            return False
    return True


@dataclass
class PushBlockPath:
    times: np.ndarray
    states: np.ndarray  # (K, M) flattened integer patterns
    depth: int
    events: int

    def levels_at(self, k: int) -> list:
        return [np.array(l) for l in split_levels(self.states[k], self.depth)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "level", "index", "value"])
            for k, t in enumerate(self.times):
                for n, lev in enumerate(self.levels_at(k), start=1):
                    for i, v in enumerate(lev):
                        w.writerow([repr(float(t)), n, i + 1, int(v)])


def _run_chain(state, depth, prm, T, rng, t0=0.0, chunk=65_536):
    """Drive kernels.pushblock_run with fresh draws until time T."""
    t = t0
    events = 0
    while True:
        exps = rng.standard_exponential(chunk)
        unifs = rng.uniform(size=chunk)
        t, used, status = kernels.pushblock_run(state, depth, prm, t, T, exps, unifs)
        events += used
        if status == 0:
            return events
        if status == 2:
            raise ValueError(f"negative rate reached at state {state.tolist()}")
        if status == 3:
            return events  # absorbing: nothing can move


def pushblock_simulate(params: PushBlockParams, pattern0, T: float, rng, record_times=()) -> PushBlockPath:
    """Event-driven push-block chain started from an integer interlacing pattern."""
    levels = [np.asarray(l).reshape(-1) for l in (pattern0.levels if isinstance(pattern0, GTPattern) else pattern0)]
    if len(levels) != params.N:
        raise ValueError(f"pattern depth {len(levels)} does not match params.N={params.N}")
    for n, l in enumerate(levels, start=1):
        if l.size != n or np.any(l != np.round(l)):
            raise ValueError(f"level {n} must hold {n} integers")
    if not discrete_interlaces(levels):
        raise ValueError("pattern violates x^{n+1}_k <= x^n_k < x^{n+1}_{k+1}")
    state = np.ascontiguousarray(np.concatenate(levels).astype(np.int64))
    rec_t = np.unique(np.concatenate([[0.0], np.asarray(record_times, dtype=float), [T]]))
    rec_t = rec_t[(rec_t >= 0) & (rec_t <= T)]
    out = np.empty((rec_t.size, state.size), dtype=np.int64)
    out[0] = state
    prm = params.prm()
    events = 0
    for k in range(1, rec_t.size):
        # memorylessness lets each segment restart its exponential race
        events += _run_chain(state, params.N, prm, rec_t[k], rng, t0=rec_t[k - 1])
        out[k] = state
    return PushBlockPath(rec_t, out, params.N, events)


def single_particle_log_increments(params: PushBlockParams, n: int, M: int, x0: float, T: float,
                                   paths: int, rng) -> np.ndarray:
    """log(X_T / X_0) for the level-n one-particle chain started at round(x0*M)."""
    start = int(round(x0 * M))
    prm = params.prm(level_shift=n - 1)
    out = np.empty(paths)
    for j in range(paths):
        state = np.array([start], dtype=np.int64)
        _run_chain(state, 1, prm, T, rng, chunk=4096)
        if state[0] <= 0:
            raise ValueError("chain left the positive half-line; raise x0 or M")
        out[j] = np.log(state[0] / start)
    return out


def exact_log_moments(params: PushBlockParams, n: int, M: int, x0: float, T: float,
                      width: float = 8.0, rtol: float = 1e-10):
    """Mean and variance of log(X_T/X_0) for the one-particle chain from its forward equation.

    The lattice is truncated to start * exp(+-width * sqrt(2T)) (at least 1),
    which carries negligible mass; the stiff linear ODE is integrated with an
    implicit method.
    """
    start = int(round(x0 * M))
    spread = np.exp(width * np.sqrt(2.0 * T) + abs(1 - 2 * n - params.sigma) * T)
    lo = max(1, int(np.floor(start / spread)))
    hi = int(np.ceil(start * spread)) + 1
    xs = np.arange(lo, hi + 1, dtype=float)
    lam = params.right_rate(xs, n)
    mu = params.left_rate(xs)
    lam[-1] = 0.0  # reflecting truncation
    mu[0] = 0.0
    # dp/dt = A p with A[i+1, i] = lam_i, A[i-1, i] = mu_i, A[i, i] = -(lam_i + mu_i)
    A = sparse.diags([lam[:-1], -(lam + mu), mu[1:]], [-1, 0, 1], format="csc")
    p0 = np.zeros(xs.size)
    p0[start - lo] = 1.0
    sol = integrate.solve_ivp(lambda t, p: A @ p, (0.0, T), p0, method="BDF", jac=A,
                              rtol=rtol, atol=1e-14)
    if not sol.success:
        raise RuntimeError(f"forward equation failed: {sol.message}")
    p = np.clip(sol.y[:, -1], 0.0, None)
    p /= p.sum()
    g = np.log(xs / start)
    mean = float(p @ g)
    var = float(p @ (g - mean) ** 2)
    return mean, var


@dataclass
class ScalingReport:
    M: int
    mean: float
    var: float
    se_mean: float
    se_var: float
    target_mean: float
    target_var: float
    exact_mean: float
    exact_var: float
    paths: int

    @property
    def z_mean(self) -> float:
        return abs(self.mean - self.target_mean) / self.se_mean

    @property
    def z_var(self) -> float:
        return abs(self.var - self.target_var) / self.se_var

    @property
    def exact_error(self) -> float:
        """Discretization error of the exact chain moments against the limit."""
        return max(abs(self.exact_mean - self.target_mean), abs(self.exact_var - self.target_var))


def pushblock_scaling_check(params: PushBlockParams, Ms=(100, 400), T: float = 0.25, n: int | None = None,
                            x0: float = 0.5, paths: int = 4000, rng=None) -> list:
    """Compare log-increments of the rescaled level-n chain with geometric Brownian motion.

    The limit has log-mean (1 - 2n - (u+u'+v+v')) T and log-variance 2T.
    Monte-Carlo moments come with standard errors (the variance SE uses the
    fourth central moment); exact chain moments from the forward equation
    expose the deterministic error in M, which the Monte-Carlo noise hides.
    """
    if rng is None:
        rng = np.random.default_rng()
    n = params.N if n is None else n
    target_mean = (1 - 2 * n - params.sigma) * T
    target_var = 2.0 * T
    out = []
    for M in Ms:
        d = single_particle_log_increments(params, n, M, x0, T, paths, rng)
        mean = float(d.mean())
        var = float(d.var(ddof=1))
        m4 = float(np.mean((d - mean) ** 4))
        se_var = float(np.sqrt(max(m4 - var * var, 0.0) / paths))
        em, ev = exact_log_moments(params, n, M, x0, T)
        out.append(ScalingReport(M, mean, var, float(d.std(ddof=1) / np.sqrt(paths)), se_var,
                                 target_mean, target_var, em, ev, paths))
    return out


__all__ = [
    "flatten_levels", "split_levels", "levels_interlace", "gibbs_sample", "hp_bottom_sampler",
    "ReflectedSpec", "PatternPath", "reflected_simulate", "conditional_uniforms", "GibbsCheck",
    "gibbs_propagation_check", "PushBlockParams", "discrete_interlaces", "PushBlockPath",
    "pushblock_simulate", "single_particle_log_increments", "exact_log_moments", "ScalingReport",
    "pushblock_scaling_check",
]

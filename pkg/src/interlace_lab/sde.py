"""Time stepping for the single-level processes and the closed-form boundary flows.

The interacting systems (Hua-Pickrell, Dyson, its OU variant and the circle
process) and the one-dimensional diffusions L^{(n)} and their duals share one
engine: Euler-Maruyama over a batch of paths, where a trial step is accepted
only if it stays ordered and moves each particle by at most ten local standard
deviations.  A rejected step is split in two with a Brownian bridge, so the
driving noise stays a single Brownian path however fine the refinement gets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels, rmt
from .core import (
    HPParams, OmegaPoint, angle_to_cayley, cayley_to_angle, km_eigenvalue, speed_density,
)

KINDS = ("hp", "dbm", "ou", "hp-1d", "hp-dual-1d", "circle")
INTERACTING = ("hp", "dbm", "ou", "circle")
# default cap on trial steps: GAP_COEF * gap^2 / (sigma_i^2 + sigma_j^2)
GAP_COEF = 0.1


class StepHalvingExhausted(RuntimeError):
    """Raised when a step is still rejected after the maximal number of halvings."""


@dataclass(frozen=True)
class SDESystemSpec:
    """What to simulate and how.

    ``level`` is the generator level n of the one-dimensional kinds; it
    defaults to ``params.N``.  ``c`` is the OU rate.  ``circle_mode`` picks
    direct integration of the angle equation or the Cayley pushforward of the
    line process.
    """

    kind: str
    params: HPParams = field(default_factory=HPParams)
    c: float = 0.0
    level: int | None = None
    dt_base: float = 1e-3
    scheme: str = "euler-adaptive"
    max_halvings: int = 20
    bound_mult: float = 10.0
    circle_mode: str = "direct"
    gap_coef: float = GAP_COEF

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if not self.dt_base > 0:
            raise ValueError("dt_base must be positive")
        if self.scheme != "euler-adaptive":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.kind == "ou" and not self.c > 0:
            raise ValueError("the OU kind needs c > 0")
        if self.circle_mode not in ("direct", "pushforward"):
            raise ValueError("circle_mode must be 'direct' or 'pushforward'")
        if not self.gap_coef > 0:
            raise ValueError("gap_coef must be positive")


@dataclass
class PathRecord:
    """Snapshots ``states[k]`` (shape (P, N)) at ``times[k]`` for P paths."""

    times: np.ndarray
    states: np.ndarray
    seed: int | None = None
    dt_effective: float = np.inf
    rejections: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path, path_index: int = 0):
        n = self.states.shape[-1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
            for t, s in zip(self.times, self.states[:, path_index]):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in s])


# ---------------------------------------------------------------- coefficients

def _check_strict(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] > 1 and np.any(np.diff(x, axis=-1) <= 0):
        raise ValueError("coordinates must be strictly ordered (drift is singular on ties)")
    return x


def hp_drift(x, p: HPParams):
    """Drift of the interacting Hua-Pickrell system."""
    x = _check_strict(x)
    n = x.shape[-1]
    d = x[..., :, None] - x[..., None, :]
    idx = np.arange(n)
    d[..., idx, idx] = np.inf
    inter = (1.0 / d).sum(axis=-1)
    return (2 - 2 * n - 2 * p.s_re) * x + 2 * p.s_im + 2.0 * (x * x + 1.0) * inter


def hp_diffusion(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(2.0 * (x * x + 1.0))


def _kernel_setup(spec: SDESystemSpec, n: int):
    p = spec.params
    if spec.kind == "hp":
        return kernels.KIND_HP, np.array([2 - 2 * n - 2 * p.s_re, 2 * p.s_im])
    if spec.kind == "dbm":
        return kernels.KIND_DBM, np.zeros(2)
    if spec.kind == "ou":
        return kernels.KIND_OU, np.array([spec.c, 0.0])
    if spec.kind == "circle":
        return kernels.KIND_CIRCLE, np.array([-4 * n - 4 * p.s_re, 4 * p.s_im])
    lev = spec.level if spec.level is not None else p.N
    if spec.kind == "hp-1d":
        return kernels.KIND_LINEAR1D, np.array([2 - 2 * lev - 2 * p.s_re, 2 * p.s_im])
    return kernels.KIND_LINEAR1D, np.array([2 * lev + 2 * p.s_re, -2 * p.s_im])


def _sigma(kind_code, x):
    if kind_code in (kernels.KIND_HP, kernels.KIND_LINEAR1D):
        return np.sqrt(2.0 * (x * x + 1.0))
    if kind_code == kernels.KIND_CIRCLE:
        return 2.0 * np.sqrt(2.0) * np.cos(0.5 * x)
    return np.ones_like(x)


# ---------------------------------------------------------------- engine

class _Stepper:
    def __init__(self, spec: SDESystemSpec, n: int, rng):
        self.spec = spec
        self.code, prm = _kernel_setup(spec, n)
        self.prm = np.ascontiguousarray(prm, dtype=float)
        self.rng = rng
        self.dt_min = np.inf
        self.rejections = 0
        self.sigma_floor = 1e-3 if self.code == kernels.KIND_CIRCLE else 0.0

    def advance(self, x, dt, dw, depth=0):
        """Advance every path by dt along the Brownian increments dw.

        Paths whose current gaps support less than dt are split first (a
        proposal refinement, not counted as a halving); trial steps that are
        rejected are split and count towards max_halvings.
        """
        new, ok, h_gap = kernels.euler_try(x, dw, dt, self.code, self.prm, self.spec.bound_mult,
                                           self.sigma_floor, self.spec.gap_coef)
        split = h_gap < dt
        ok &= ~split
        if ok.any():
            self.dt_min = min(self.dt_min, dt)
        if ok.all():
            return new
        rejected = ~ok & ~split
        if rejected.any():
            if depth >= self.spec.max_halvings:
                raise StepHalvingExhausted(
                    f"step rejected after {depth} halvings (dt={dt:.3g}); "
                    "check the initial point or lower dt_base")
            self.rejections += int(rejected.sum())
        for mask, d in ((split, depth), (rejected, depth + 1)):
            idx = np.flatnonzero(mask)
            if idx.size == 0:
                continue
            w = dw[idx]
            # Brownian bridge midpoint of the increment
            w1 = 0.5 * w + 0.5 * np.sqrt(dt) * self.rng.standard_normal(w.shape)
            xb = self.advance(np.ascontiguousarray(x[idx]), 0.5 * dt, np.ascontiguousarray(w1), d)
            new[idx] = self.advance(xb, 0.5 * dt, np.ascontiguousarray(w - w1), d)
        return new


def _run(spec: SDESystemSpec, x, T, rng, record_times):
    n = x.shape[-1]
    st = _Stepper(spec, n, rng)
    rec_t = np.unique(np.concatenate([[0.0], np.asarray(record_times, dtype=float), [T]]))
    rec_t = rec_t[(rec_t >= 0) & (rec_t <= T)]
    states = np.empty((rec_t.size, x.shape[0], n))
    states[0] = x
    t = 0.0
    k = 1
    while k < rec_t.size:
        target = rec_t[k]
        while t < target - 1e-15 * max(1.0, target):
            dt = min(spec.dt_base, target - t)
            dw = np.sqrt(dt) * rng.standard_normal(x.shape)
            x = st.advance(np.ascontiguousarray(x), dt, dw)
            t += dt
        t = target
        states[k] = x
        k += 1
    return PathRecord(rec_t, states, None, st.dt_min, st.rejections)


def simulate(spec: SDESystemSpec, x0, T: float, rng, record_times=(), seed=None) -> PathRecord:
    """Simulate P paths from ``x0`` (shape (N,) or (P, N)) up to time T.

    Snapshots are kept at time 0, at every entry of ``record_times`` and at T.
    For the circle kind, ``x0`` holds angles in (-pi, pi).
    """
    if not T > 0:
        raise ValueError("T must be positive")
    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    if spec.kind in INTERACTING:
        _check_strict(x)
    if spec.kind == "circle":
        if np.any(np.abs(x) >= np.pi):
            raise ValueError("circle angles must lie in (-pi, pi)")
        if spec.circle_mode == "pushforward":
            line = SDESystemSpec("hp", spec.params, dt_base=spec.dt_base, max_halvings=spec.max_halvings,
                                 bound_mult=spec.bound_mult, gap_coef=spec.gap_coef)
            rec = simulate(line, angle_to_cayley(x), T, rng, record_times, seed)
            rec.states = cayley_to_angle(rec.states)
            return rec
    rec = _run(spec, x, T, rng, record_times)
    rec.seed = seed
    return rec


def diffraction_step(spec: SDESystemSpec, x0, dt_init: float, rng, tie_tol: float = 1e-12):
    """Noise-only micro-step that separates tied particles.

    Over a time dt_init a cluster of k coincident particles at position x looks
    like Dyson Brownian motion with diffusion coefficient sigma(x) started from
    a single point, whose law at time dt_init is x + sigma(x) sqrt(dt_init) times
    the eigenvalues of a k x k GUE.  Singletons receive an ordinary Gaussian
    increment.  No drift term is evaluated.
    """
    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    code, _ = _kernel_setup(spec, x.shape[-1])
    out = np.empty_like(x)
    for r in range(x.shape[0]):
        row = np.sort(x[r])
        sig = _sigma(code, row)
        start = 0
        while start < row.size:
            end = start + 1
            while end < row.size and row[end] - row[end - 1] <= tie_tol * max(1.0, abs(row[end])):
                end += 1
            k = end - start
            if k == 1:
                noise = rng.standard_normal(1)
            else:
                noise = rmt.eval_(rmt.gue_sample(k, 1.0, rng))
            out[r, start:end] = row[start:end] + sig[start:end] * np.sqrt(dt_init) * noise
            start = end
        out[r] = np.sort(out[r])
    return out


def hp_start_degenerate(spec: SDESystemSpec, x0, T: float, rng, dt_init: float | None = None,
                        record_times=(), seed=None) -> PathRecord:
    """Simulate from a start with ties: diffraction micro-step, then the ordinary engine."""
    if dt_init is None:
        dt_init = spec.dt_base * 1e-4
    if dt_init > spec.dt_base * 1e-4:
        raise ValueError("dt_init must not exceed dt_base * 1e-4")
    x1 = diffraction_step(spec, x0, dt_init, rng)
    if spec.kind == "circle" and spec.circle_mode == "pushforward":
        raise ValueError("degenerate starts are supported for direct integration only")
    rest = [t - dt_init for t in record_times if t > dt_init]
    rec = _run(spec, x1, T - dt_init, rng, rest)
    x0b = np.broadcast_to(np.atleast_2d(np.asarray(x0, dtype=float)), x1.shape)
    rec.times = np.concatenate([[0.0], rec.times + dt_init])
    rec.states = np.concatenate([x0b[None], rec.states], axis=0)
    rec.dt_effective = min(rec.dt_effective, dt_init)
    rec.seed = seed
    return rec


# ---------------------------------------------------------------- boundary flows

def dbm_boundary_flow(omega0: OmegaPoint, t: float) -> OmegaPoint:
    """Dyson Brownian motion on the boundary: only the Gaussian component grows, by t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return OmegaPoint(omega0.alpha_plus, omega0.alpha_minus, omega0.gamma1, omega0.delta + t)


def ou_boundary_flow(omega0: OmegaPoint, t: float, c: float) -> OmegaPoint:
    """OU variant: alphas and gamma1 decay like e^{-ct}, delta relaxes to 1/(2c)."""
    if t < 0 or not c > 0:
        raise ValueError("need t >= 0 and c > 0")
    e = np.exp(-c * t)
    return OmegaPoint(
        tuple(a * e for a in omega0.alpha_plus),
        tuple(a * e for a in omega0.alpha_minus),
        omega0.gamma1 * e,
        (1.0 - e * e) / (2.0 * c) + omega0.delta * e * e,
    )


# ---------------------------------------------------------------- generators

def generator_apply_1d(n: int, p: HPParams, dual: bool, f, x, fprime=None, fsecond=None, h: float = 1e-5):
    """Apply L^{(n)} (or its dual) to f at x.

    Derivatives are taken from ``fprime``/``fsecond`` when given, otherwise by
    central differences with step h.
    """
    x = np.asarray(x, dtype=float)
    d1 = fprime(x) if fprime is not None else (f(x + h) - f(x - h)) / (2 * h)
    d2 = fsecond(x) if fsecond is not None else (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)
    if dual:
        b = (2 * n + 2 * p.s_re) * x - 2 * p.s_im
    else:
        b = (2 - 2 * n - 2 * p.s_re) * x + 2 * p.s_im
    return (x * x + 1.0) * d2 + b * d1


def inverse_dual_speed(n: int, p: HPParams):
    """(m_hat^{(n)})^{-1} with analytic first and second derivatives."""
    a = p.s_re + n - 1
    b = p.s_im

    def f(x):
        return 1.0 / speed_density(x, n, p, dual=True)

    def g(x):  # f'/f
        return (-2 * a * x + 2 * b) / (1 + x * x)

    def fp(x):
        return f(x) * g(x)

    def fpp(x):
        gp = (-2 * a * (1 + x * x) - (-2 * a * x + 2 * b) * 2 * x) / (1 + x * x) ** 2
        return f(x) * (g(x) ** 2 + gp)

    return f, fp, fpp


def eigenfunction_check(N: int, p: HPParams, x) -> float:
    """Relative residual of sum_i L_{x_i} Delta - lambda_{N,s} Delta at x.

    Evaluated as sum_i [(x_i^2 + 1)(S1_i^2 - S2_i) + b(x_i) S1_i] - lambda with
    S1_i, S2_i the sums of 1/(x_i - x_j) and 1/(x_i - x_j)^2, which is the
    residual divided by Delta without forming Delta itself.
    """
    x = _check_strict(np.asarray(x, dtype=float).reshape(-1))
    if x.size != N:
        raise ValueError("x must have N coordinates")
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, np.inf)
    inv = 1.0 / diff
    s1 = inv.sum(axis=1)
    s2 = (inv * inv).sum(axis=1)
    b = (2 - 2 * N - 2 * p.s_re) * x + 2 * p.s_im
    lhs = np.sum((x * x + 1.0) * (s1 * s1 - s2) + b * s1)
    return float(abs(lhs - km_eigenvalue(N, p.s_re)))


__all__ = [
    "SDESystemSpec", "PathRecord", "StepHalvingExhausted", "hp_drift", "hp_diffusion", "simulate",
    "diffraction_step", "hp_start_degenerate", "dbm_boundary_flow", "ou_boundary_flow",
    "generator_apply_1d", "inverse_dual_speed", "eigenfunction_check",
]

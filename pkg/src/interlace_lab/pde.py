"""Transition densities of the one-dimensional generators and the identities built on them.

The generator (1+x^2) d^2/dx^2 + (beta x + gamma) d/dx becomes, in y = arsinh x,

    d^2/dy^2 + [(beta - 1) tanh y + gamma sech y] d/dy = rho^{-1} d/dy (rho d/dy),
    rho(y) = cosh(y)^{beta - 1} exp(gamma arctan(sinh y)),

with beta = 2 - 2n - 2 Re s, gamma = 2 Im s for L^{(n)} and beta = 2n + 2 Re s,
gamma = -2 Im s for the dual.  A conservative finite-volume discretisation on
a uniform cell-centred grid in y with zero flux at +-A is reversible with
respect to pi_i = rho(y_i) h, so the symmetrised operator is tridiagonal and
symmetric.  Crank-Nicolson in time is evaluated exactly through its
eigendecomposition: K = Pi^{-1/2} V r(dt Lambda)^m V^T Pi^{1/2}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import HPParams, dual_constant, km_eigenvalue, speed_density, vandermonde

MASS_DEFECT_TOL = 1e-4


class GridError(ValueError):
    """A point lies outside the grid, or truncation leaks too much mass."""


@dataclass(frozen=True)
class GridConfig:
    """Half-width A and cell size h in the arsinh coordinate, Crank-Nicolson step dt."""

    A: float = 8.0
    h: float = 0.01
    dt: float = 1e-4
    mass_defect_tol: float = MASS_DEFECT_TOL

    def __post_init__(self):
        if not (self.A > 0 and self.h > 0 and self.dt > 0):
            raise ValueError("A, h and dt must be positive")
        if self.h >= self.A:
            raise ValueError("h must be smaller than A")

    @property
    def cells(self) -> int:
        return int(round(2.0 * self.A / self.h))


def generator_coefficients(n: int, p: HPParams, dual: bool):
    """(beta, gamma) of (1+x^2) f'' + (beta x + gamma) f'."""
    if dual:
        return 2.0 * n + 2.0 * p.s_re, -2.0 * p.s_im
    return 2.0 - 2.0 * n - 2.0 * p.s_re, 2.0 * p.s_im


def _log_rho(y, beta, gamma):
    # log cosh without overflow
    ay = np.abs(y)
    logcosh = ay + np.log1p(np.exp(-2.0 * ay)) - np.log(2.0)
    return (beta - 1.0) * logcosh + gamma * np.arctan(np.sinh(y))


@dataclass(frozen=True)
class DensityGrid:
    """Transition density p_t(x_i, x_j) with respect to Lebesgue measure in x.

    ``kernel[i, j]`` is the probability to move from cell i to cell j; the
    density is kernel / (h cosh y_j).  ``mass_defect`` bounds the probability
    mass that rows started in the central quarter of the domain (|y| <= A/4)
    put beyond |y| = 3A/4, a proxy for truncation error.  Rows started further
    out feel the truncated boundary and are not used by the checks.
    """

    y_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    kernel: np.ndarray
    t: float
    h: float
    n: int
    p: HPParams
    dual: bool
    mass_defect: float
    config: GridConfig = field(default_factory=GridConfig)

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([self.y_grid - 0.5 * self.h, [self.y_grid[-1] + 0.5 * self.h]])

    def speed(self, x):
        return speed_density(x, self.n, self.p, dual=self.dual)

    def _row_weights(self, x0):
        """Linear interpolation weights over rows at arsinh(x0)."""
        y0 = np.arcsinh(np.asarray(x0, dtype=float))
        pos = (y0 - self.y_grid[0]) / self.h
        last = self.y_grid.size - 1
        if np.any(pos < -1e-9) or np.any(pos > last + 1e-9):
            raise GridError("point outside the grid")
        pos = np.clip(pos, 0.0, last)
        i = np.clip(np.floor(pos).astype(int), 0, self.y_grid.size - 2)
        w = pos - i
        return i, w

    def density(self, x0, x1):
        """Bilinear interpolation (in arsinh coordinates) of p_t(x0, x1)."""
        x0, x1 = np.broadcast_arrays(np.asarray(x0, dtype=float), np.asarray(x1, dtype=float))
        i, wi = self._row_weights(x0)
        j, wj = self._row_weights(x1)
        v = self.values
        return ((1 - wi) * (1 - wj) * v[i, j] + wi * (1 - wj) * v[i + 1, j]
                + (1 - wi) * wj * v[i, j + 1] + wi * wj * v[i + 1, j + 1])

    def _cum_edges(self):
        c = np.cumsum(self.kernel, axis=1)
        return np.concatenate([np.zeros((c.shape[0], 1)), c], axis=1)

    def cdf(self, x0, a):
        """P_{x0}(X_t <= a): piecewise-linear CDF between cell edges, linear across rows."""
        x0, a = np.broadcast_arrays(np.asarray(x0, dtype=float), np.asarray(a, dtype=float))
        i, wi = self._row_weights(x0)
        cum = self._cum_edges()
        ya = np.arcsinh(a)
        e = self.edges
        pos = np.clip((ya - e[0]) / self.h, 0.0, e.size - 1.0)
        k = np.clip(np.floor(pos).astype(int), 0, e.size - 2)
        wk = pos - k
        row = lambda r: (1 - wk) * cum[r, k] + wk * cum[r, k + 1]  # noqa: E731
        return (1 - wi) * row(i) + wi * row(i + 1)

    def dcdf_dx0(self, x0, a, eps: float | None = None):
        """d/dx0 of P_{x0}(X_t <= a) by a central difference in arsinh(x0)."""
        eps = self.h if eps is None else eps
        y0 = np.arcsinh(np.asarray(x0, dtype=float))
        up = self.cdf(np.sinh(y0 + eps), a)
        dn = self.cdf(np.sinh(y0 - eps), a)
        return (up - dn) / (2.0 * eps * np.cosh(y0))

    def ddensity_dx0(self, x0, x1, eps: float | None = None):
        """d/dx0 of p_t(x0, x1) by a central difference in arsinh(x0)."""
        eps = self.h if eps is None else eps
        y0 = np.arcsinh(np.asarray(x0, dtype=float))
        return (self.density(np.sinh(y0 + eps), x1) - self.density(np.sinh(y0 - eps), x1)) / (
            2.0 * eps * np.cosh(y0))

    def integrate_row(self, x0, f):
        """int p_t(x0, y) f(y) dy by the cell rule."""
        i, wi = self._row_weights(x0)
        fx = f(self.x_grid)
        return (1 - wi) * (self.kernel[i] @ fx) + wi * (self.kernel[i + 1] @ fx)

    def central(self, frac: float = 0.25) -> np.ndarray:
        """Indices of nodes with |y| <= frac * A."""
        return np.flatnonzero(np.abs(self.y_grid) <= frac * self.config.A)

    def to_csv(self, path, stride: int = 1):
        idx = np.arange(0, self.x_grid.size, stride)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "value"])
            for i in idx:
                for j in idx:
                    w.writerow([repr(float(self.x_grid[i])), repr(float(self.x_grid[j])),
                                repr(float(self.values[i, j]))])


def _spectral_cn(cfg: GridConfig, beta, gamma, t):
    K = cfg.cells
    h = cfg.h
    y = -cfg.A + (np.arange(K) + 0.5) * h
    lr = _log_rho(y, beta, gamma)
    lr_half = _log_rho(y[:-1] + 0.5 * h, beta, gamma)
    # symmetrised operator S = Pi^{1/2} Q Pi^{-1/2}
    up = np.exp(lr_half - lr[:-1])  # rho_{i+1/2}/rho_i
    dn = np.exp(lr_half - lr[1:])  # rho_{i+1/2}/rho_{i+1}
    diag = np.zeros(K)
    diag[:-1] -= up
    diag[1:] -= dn
    off = np.exp(lr_half - 0.5 * (lr[:-1] + lr[1:]))
    lam, V = eigh_tridiagonal(diag / h**2, off / h**2)
    m = max(1, int(round(t / cfg.dt)))
    z = lam * (t / m)
    r = (1.0 + 0.5 * z) / (1.0 - 0.5 * z)
    # r^m with sign kept for negative r
    rm = np.sign(r) ** m * np.exp(m * np.log(np.abs(r) + 1e-300))
    half = 0.5 * lr
    half = half - half.max()
    kern = (np.exp(-half)[:, None] * V) @ (rm[:, None] * V.T) * np.exp(half)[None, :]
    return y, kern


def solve_density(n: int, p: HPParams, dual: bool, t: float, config: GridConfig | None = None,
                  check_mass: bool = True) -> DensityGrid:
    """Transition density of L^{(n)} (or its dual) at time t on the arsinh grid."""
    if not t > 0:
        raise ValueError("t must be positive")
    cfg = config or GridConfig()
    beta, gamma = generator_coefficients(n, p, dual)
    y, kern = _spectral_cn(cfg, beta, gamma, t)
    kern = np.where(kern < 0, np.where(kern < -1e-10, kern, 0.0), kern)
    x = np.sinh(y)
    vals = kern / (cfg.h * np.cosh(y))[None, :]
    rows = np.flatnonzero(np.abs(y) <= 0.25 * cfg.A)
    outer = np.abs(y) > 0.75 * cfg.A
    leak = float(np.max(kern[np.ix_(rows, np.flatnonzero(outer))].sum(axis=1))) if rows.size else 0.0
    row_err = float(np.max(np.abs(kern.sum(axis=1) - 1.0)))
    defect = max(leak, row_err)
    if check_mass and defect > cfg.mass_defect_tol:
        raise GridError(f"mass defect {defect:.3g} exceeds {cfg.mass_defect_tol:.3g}; widen the domain (A)")
    return DensityGrid(y, x, vals, kern, float(t), cfg.h, int(n), p, bool(dual), defect, cfg)


def detailed_balance_gap(grid: DensityGrid, idx=None) -> float:
    """max relative |m(x)p(x,y) - m(y)p(y,x)| over the index set (default: central nodes)."""
    idx = grid.central() if idx is None else np.asarray(idx)
    m = grid.speed(grid.x_grid[idx])
    a = m[:, None] * grid.values[np.ix_(idx, idx)]
    scale = np.maximum(np.abs(a), np.abs(a.T))
    mask = scale > 1e-8 * scale.max()
    return float(np.max(np.abs(a - a.T)[mask] / scale[mask]))


def km_determinant(grid: DensityGrid, x, y, prefactor: bool = False) -> float:
    """det(p_t(x_i, y_j)), optionally times exp(-lambda_{N,s} t) Delta(y)/Delta(x)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise ValueError("x and y must have the same length")
    if x.size > 1 and (np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0)):
        raise ValueError("x and y must be strictly ordered")
    M = grid.density(x[:, None], y[None, :])
    d = float(np.linalg.det(np.atleast_2d(M)))
    if not d > 0:
        raise RuntimeError(f"Karlin-McGregor determinant is not positive ({d:.3g})")
    if prefactor:
        N = x.size
        d *= np.exp(-km_eigenvalue(N, grid.p.s_re) * grid.t) * float(vandermonde(y)) / float(vandermonde(x))
    return d


# ---------------------------------------------------------------- Siegmund duality

@dataclass
class CheckResult:
    gap: float
    details: dict = field(default_factory=dict)


def siegmund_lattice(lo: float = -2.0, hi: float = 2.0, k: int = 10):
    pts = np.linspace(lo, hi, k)
    return np.meshgrid(pts, pts, indexing="ij")


def check_siegmund_pde(n: int, p: HPParams, t: float, config: GridConfig | None = None,
                       lattice=None, primal=None, dual=None) -> CheckResult:
    """Density form -d/dy P_y(X_t <= x) = p_hat_t(x, y) on a lattice of (x, y).

    Also reports the integrated form P_y(X_t <= x) = P_x(X_hat_t >= y).
    """
    primal = primal or solve_density(n, p, False, t, config)
    dual = dual or solve_density(n, p, True, t, config)
    X, Y = lattice if lattice is not None else siegmund_lattice()
    lhs = -primal.dcdf_dx0(Y, X)
    rhs = dual.density(X, Y)
    integ = np.abs(primal.cdf(Y, X) - (1.0 - dual.cdf(X, Y)))
    return CheckResult(float(np.max(np.abs(lhs - rhs))),
                       {"integrated_gap": float(integ.max()), "h": primal.h, "t": t, "n": n,
                        "lattice_points": int(X.size)})


def check_siegmund_mc(n: int, p: HPParams, x: float, y: float, t: float, paths: int, rng,
                      dt: float = 1e-3) -> CheckResult:
    """P_y(X_t <= x) against P_x(X_hat_t >= y) by Monte Carlo; gap and combined SE."""
    from . import sde

    a = sde.simulate(sde.SDESystemSpec("hp-1d", p, level=n, dt_base=dt), np.full((paths, 1), y), t, rng).final[:, 0]
    b = sde.simulate(sde.SDESystemSpec("hp-dual-1d", p, level=n, dt_base=dt), np.full((paths, 1), x), t,
                     rng).final[:, 0]
    pa = float(np.mean(a <= x))
    pb = float(np.mean(b >= y))
    se = float(np.sqrt(pa * (1 - pa) / paths + pb * (1 - pb) / paths))
    return CheckResult(abs(pa - pb), {"lhs": pa, "rhs": pb, "se": se, "z": abs(pa - pb) / se if se > 0 else 0.0,
                                      "paths": paths, "dt": dt})


def check_siegmund(x, y, t, mode: str = "pde", n: int = 2, p: HPParams | None = None, **kw) -> float:
    """Absolute gap of the Siegmund relation in ``pde`` or ``mc`` mode (see the specific functions)."""
    p = p or HPParams()
    if mode == "pde":
        lattice = (np.atleast_2d(np.asarray(x, dtype=float)), np.atleast_2d(np.asarray(y, dtype=float)))
        return check_siegmund_pde(n, p, t, kw.get("config"), lattice=lattice).gap
    if mode == "mc":
        rng = kw.get("rng") or np.random.default_rng()
        return check_siegmund_mc(n, p, float(x), float(y), t, kw.get("paths", 1_000_000), rng,
                                 kw.get("dt", 1e-3)).gap
    raise ValueError("mode must be 'pde' or 'mc'")


# ---------------------------------------------------------------- intermediate intertwining at N = 1

def _trap_rows(grid: DensityGrid, a: float, b: float, fn):
    """int_a^b fn(x) dx using the grid nodes inside (a, b) plus both endpoints (trapezoid in x)."""
    inner = grid.x_grid[(grid.x_grid > a) & (grid.x_grid < b)]
    xs = np.concatenate([[a], inner, [b]])
    vals = fn(xs)
    dx = np.diff(xs)
    return np.tensordot(0.5 * dx, vals[:-1] + vals[1:], axes=(0, 0))


def check_intermediate_intertwining(t: float, p: HPParams | None = None, config: GridConfig | None = None,
                                    x_pairs=None, yprime=None, primal=None, dual=None) -> CheckResult:
    """Both sides of the N = 1 intertwining of killed and dual kernels.

    LHS(x, y') = int det[p_t(x_i, x'_j)] m_hat(y') 1(x'_1 <= y' <= x'_2) dx'
    factorises column by column into m_hat(y') [F_{x1}(y') - F_{x2}(y')] with
    F_x(a) = P_x(X_t <= a) accumulated from the density grid.
    RHS(x, y') = int_{x1}^{x2} m_hat(y) p_hat_t(y, y') dy by the trapezoid rule.
    Level 2 generators throughout.  Returns the max absolute gap.
    """
    p = p or HPParams()
    n = 2
    primal = primal or solve_density(n, p, False, t, config)
    dual = dual or solve_density(n, p, True, t, config)
    if x_pairs is None:
        x_pairs = [(-1.0, 1.0), (-2.0, 0.5), (-0.5, 2.0), (0.25, 1.5)]
    if yprime is None:
        yprime = np.linspace(-3.0, 3.0, 61)
    yprime = np.asarray(yprime, dtype=float)
    mhat = lambda z: speed_density(z, n, p, dual=True)  # noqa: E731
    gaps = []
    for x1, x2 in x_pairs:
        lhs = mhat(yprime) * (primal.cdf(x1, yprime) - primal.cdf(x2, yprime))
        rhs = _trap_rows(dual, x1, x2, lambda ys: mhat(ys)[:, None] * dual.density(ys[:, None], yprime[None, :]))
        gaps.append(float(np.max(np.abs(lhs - rhs))))
    return CheckResult(max(gaps), {"per_pair": gaps, "h": primal.h, "t": t})


# ---------------------------------------------------------------- block determinant kernel

def block_kernel_eval(x, y, xp, yp, primal: DensityGrid, dual: DensityGrid) -> float:
    """The 3 x 3 block determinant q_t((x, y), (x', y')) at N = 1."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    Q = _block_matrix(x, float(y), xp, float(yp), primal, dual)
    return float(np.linalg.det(Q))


def _block_matrix(x, y, xp, yp, primal, dual):
    n, p = primal.n, primal.p
    mh = lambda z: speed_density(z, n, p, dual=True)  # noqa: E731
    Q = np.empty((3, 3))
    Q[:2, :2] = primal.density(x[:, None], xp[None, :])
    Q[0, 2] = mh(yp) * (primal.cdf(x[0], yp) - 1.0)
    Q[1, 2] = mh(yp) * primal.cdf(x[1], yp)
    Q[2, :2] = -primal.ddensity_dx0(y, xp) / mh(y)
    Q[2, 2] = dual.density(y, yp)
    return Q


def block_kernel_identities(x, y, xp, yp, primal: DensityGrid, dual: DensityGrid):
    """Gaps of the two integral identities of the block kernel at one configuration.

    identity 1: int over x'_1 <= y' <= x'_2 of q dx' = p_hat_t(y, y');
    identity 2: int over x_1 <= y <= x_2 of m_hat(y) q dy = det A(x, x') m_hat(y').
    The determinant is multilinear in its columns (identity 1) and rows
    (identity 2), so each quadrature acts on one column or row at a time.
    """
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    n, p = primal.n, primal.p
    mh = lambda z: speed_density(z, n, p, dual=True)  # noqa: E731
    Q = _block_matrix(x, y, xp, yp, primal, dual)
    lo, hi = primal.x_grid[0], primal.x_grid[-1]
    # identity 1: column 1 over (-inf, y'], column 2 over [y', inf)
    Q1 = Q.copy()
    for col, (a, b) in enumerate(((lo, yp), (yp, hi))):
        Q1[:2, col] = _trap_rows(primal, a, b, lambda z: primal.density(x[None, :], z[:, None]))
        Q1[2, col] = _trap_rows(primal, a, b, lambda z: -primal.ddensity_dx0(y, z) / mh(y))
    id1 = abs(np.linalg.det(Q1) - float(dual.density(y, yp)))
    # identity 2: row 3 weighted by m_hat(y) over [x1, x2]
    Q2 = Q.copy()
    Q2[2, :2] = _trap_rows(primal, x[0], x[1], lambda z: -primal.ddensity_dx0(z[:, None], xp[None, :]))
    Q2[2, 2] = _trap_rows(dual, x[0], x[1], lambda z: mh(z) * dual.density(z, yp))
    id2 = abs(np.linalg.det(Q2) - np.linalg.det(Q[:2, :2]) * mh(yp))
    return float(id1), float(id2)


def default_block_configs():
    return [
        ((-1.0, 1.0), 0.2, (-0.8, 1.2), 0.3),
        ((-1.5, 0.5), -0.4, (-1.0, 0.8), -0.2),
        ((-0.5, 1.5), 0.9, (-0.3, 2.0), 0.5),
    ]


def check_block_kernel(t: float, p: HPParams | None = None, config: GridConfig | None = None, configs=None,
                       primal=None, dual=None) -> CheckResult:
    p = p or HPParams()
    primal = primal or solve_density(2, p, False, t, config)
    dual = dual or solve_density(2, p, True, t, config)
    g1, g2 = [], []
    for x, y, xp, yp in (configs or default_block_configs()):
        a, b = block_kernel_identities(x, y, xp, yp, primal, dual)
        g1.append(a)
        g2.append(b)
    return CheckResult(max(max(g1), max(g2)), {"identity1": g1, "identity2": g2, "h": primal.h, "t": t})


# ---------------------------------------------------------------- h-transform

def check_h_transform(t: float, N: int = 1, p: HPParams | None = None, config: GridConfig | None = None,
                      frac: float = 0.25, floor: float = 1e-3, primal=None, dual=None,
                      constant: float | None = None) -> CheckResult:
    """exp(-c_{N,s} t) p_hat^{(N+1)}_t(x, y) m_hat(x)/m_hat(y) against p^{(N)}_t(x, y).

    Compared on the central sub-grid |arsinh x|, |arsinh y| <= frac*A where the
    reference density exceeds ``floor`` times its maximum; max relative gap.
    ``constant`` replaces c_{N,s} (negative controls only).
    """
    p = p or HPParams()
    prim = primal or solve_density(N, p, False, t, config)
    dual = dual or solve_density(N + 1, p, True, t, config)
    c = dual_constant(N, p.s_re) if constant is None else constant
    idx = prim.central(frac)
    xs = prim.x_grid[idx]
    mh = speed_density(xs, N + 1, p, dual=True)
    lhs = np.exp(-c * t) * dual.values[np.ix_(idx, idx)] * mh[:, None] / mh[None, :]
    ref = prim.values[np.ix_(idx, idx)]
    mask = ref > floor * ref.max()
    rel = np.abs(lhs - ref)[mask] / ref[mask]
    return CheckResult(float(rel.max()), {"h": prim.h, "t": t, "N": N, "points": int(mask.sum()), "c": c})


def refinement_study(fn, hs=(0.04, 0.02, 0.01), **kw):
    """Run ``fn(config=GridConfig(h=h), **kw)`` for each h; returns list of (h, gap)."""
    out = []
    for h in hs:
        base = kw.pop("config", None) or GridConfig()
        cfg = GridConfig(A=base.A, h=h, dt=base.dt, mass_defect_tol=base.mass_defect_tol)
        out.append((h, fn(config=cfg, **kw).gap))
        kw["config"] = base
    return out


def is_monotone_decreasing(values) -> bool:
    v = list(values)
    return all(b < a for a, b in zip(v, v[1:]))


__all__ = [
    "GridConfig", "GridError", "DensityGrid", "generator_coefficients", "solve_density", "detailed_balance_gap",
    "km_determinant", "CheckResult", "siegmund_lattice", "check_siegmund_pde", "check_siegmund_mc",
    "check_siegmund", "check_intermediate_intertwining", "block_kernel_eval", "block_kernel_identities",
    "default_block_configs", "check_block_kernel", "check_h_transform", "refinement_study",
    "is_monotone_decreasing", "MASS_DEFECT_TOL",
]

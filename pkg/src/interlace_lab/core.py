"""Domain types and closed-form formulas shared by every other module.

Coordinates are plain floats.  Functions that act on a configuration accept
either a :class:`WeylPoint` or any array-like of ordered reals; most of them
also broadcast over a leading batch axis, which is how the samplers and
simulators use them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class WeylPoint:
    """Weakly ordered real configuration (a point of the Weyl chamber)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size < 1:
            raise ValueError("WeylPoint needs at least one coordinate")
        if np.any(np.diff(v) < 0):
            raise ValueError("WeylPoint coordinates must be nondecreasing")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.size

    def is_strict(self) -> bool:
        return bool(np.all(np.diff(self.values) > 0))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class HPParams:
    """Hua-Pickrell parameter s = s_re + i s_im at level N."""

    s_re: float = 0.0
    s_im: float = 0.0
    N: int = 1

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError("N must be >= 1")

    def at_level(self, n: int) -> "HPParams":
        return HPParams(self.s_re, self.s_im, n)

    def require_finite_measure(self):
        if not self.s_re > -0.5:
            raise ValueError(f"the measure is finite only for Re s > -1/2 (got {self.s_re})")


@dataclass(frozen=True)
class OmegaPoint:
    """Boundary coordinates (alpha+, alpha-, gamma1, delta) with finite alpha support."""

    alpha_plus: tuple = ()
    alpha_minus: tuple = ()
    gamma1: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        ap = tuple(float(a) for a in self.alpha_plus)
        am = tuple(float(a) for a in self.alpha_minus)
        for name, seq in (("alpha_plus", ap), ("alpha_minus", am)):
            if any(a < 0 for a in seq):
                raise ValueError(f"{name} entries must be nonnegative")
            if any(seq[i] < seq[i + 1] for i in range(len(seq) - 1)):
                raise ValueError(f"{name} must be nonincreasing")
        object.__setattr__(self, "alpha_plus", ap)
        object.__setattr__(self, "alpha_minus", am)
        object.__setattr__(self, "gamma1", float(self.gamma1))
        object.__setattr__(self, "delta", float(self.delta))
        # roundoff slack only; a genuinely negative gamma2 is rejected
        if self.gamma2 < -1e-12 * max(1.0, self.delta):
            raise ValueError("sum of squared alphas exceeds delta")

    @classmethod
    def from_gamma2(cls, alpha_plus=(), alpha_minus=(), gamma1=0.0, gamma2=0.0):
        """Build from gamma2 instead of delta."""
        sq = sum(a * a for a in alpha_plus) + sum(a * a for a in alpha_minus)
        return cls(tuple(alpha_plus), tuple(alpha_minus), gamma1, gamma2 + sq)

    @property
    def gamma2(self) -> float:
        return self.delta - sum(a * a for a in self.alpha_plus) - sum(a * a for a in self.alpha_minus)


@dataclass
class GTPattern:
    """Interlacing triangular array; ``levels[n-1]`` holds the n entries of level n."""

    levels: list = field(default_factory=list)

    def __post_init__(self):
        self.levels = [np.asarray(l, dtype=float).reshape(-1) for l in self.levels]
        for n, lev in enumerate(self.levels, start=1):
            if lev.size != n:
                raise ValueError(f"level {n} must have {n} entries, got {lev.size}")

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def bottom(self) -> np.ndarray:
        return self.levels[-1]

    def is_interlacing(self, tol: float = 0.0) -> bool:
        return all(interlaces(self.levels[n - 1], self.levels[n], tol) for n in range(1, self.depth))


def interlaces(y, x, tol: float = 0.0) -> bool:
    """True when y (length N) interlaces x (length N+1): x1 <= y1 <= x2 <= ... <= x_{N+1}."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != y.shape[-1] + 1:
        raise ValueError("interlacing needs len(x) == len(y) + 1")
    ok = (x[..., :-1] <= y + tol) & (y <= x[..., 1:] + tol)
    return bool(np.all(ok))


# ---------------------------------------------------------------- Cayley map

def cayley_to_angle(x):
    """Scalar Cayley transform, x -> 2 arctan(x) in (-pi, pi)."""
    return 2.0 * np.arctan(x)


def angle_to_cayley(theta):
    """Inverse of :func:`cayley_to_angle`."""
    return np.tan(0.5 * np.asarray(theta, dtype=float))


# ---------------------------------------------------------------- Vandermonde

def vandermonde(x):
    """Delta_N(x) = prod_{i<j} (x_j - x_i); broadcasts over leading axes."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    out = np.ones(x.shape[:-1])
    for i in range(n):
        for j in range(i + 1, n):
            out = out * (x[..., j] - x[..., i])
    return out[()] if out.ndim == 0 else out


def log_abs_vandermonde(x):
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    out = np.zeros(x.shape[:-1])
    for i in range(n):
        for j in range(i + 1, n):
            out = out + np.log(np.abs(x[..., j] - x[..., i]))
    return out[()] if out.ndim == 0 else out


def vandermonde_derivatives(x):
    """Return (Delta, grad, diag Hessian) of the Vandermonde at a strictly ordered point.

    With S1_i = sum_{j != i} 1/(x_i - x_j) and S2_i = sum_{j != i} 1/(x_i - x_j)^2,
    d_i Delta = Delta * S1_i and d_i^2 Delta = Delta * (S1_i^2 - S2_i).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    d = vandermonde(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, np.inf)
    inv = 1.0 / diff
    s1 = inv.sum(axis=1)
    s2 = (inv * inv).sum(axis=1)
    return d, d * s1, d * (s1 * s1 - s2)


# ---------------------------------------------------------------- constants

def km_eigenvalue(N: int, s_re: float) -> float:
    """lambda_{N,s}: eigenvalue of the Vandermonde under the summed one-dimensional generators."""
    return N * (N - 1) * (-2 * N + 1 - 3 * s_re) / 3.0


def dual_constant(N: int, s_re: float) -> float:
    """c_{N,s} = -2N - 2 Re s, the eigenvalue of 1/m_hat under the dual generator at level N+1."""
    return -2.0 * N - 2.0 * s_re


# ---------------------------------------------------------------- embedding

def embed(x) -> OmegaPoint:
    """Map a configuration in W^N to boundary coordinates."""
    x = np.sort(np.asarray(x, dtype=float).reshape(-1))
    n = x.size
    ap = tuple(np.maximum(x[::-1], 0.0) / n)
    am = tuple(np.maximum(-x, 0.0) / n)
    return OmegaPoint(ap, am, float(x.mean()), float(np.sum(x * x) / n**2))


def embed_batch(x):
    """Vectorised embedding: returns dict of arrays gamma1, delta, alpha_plus1, alpha_minus1."""
    x = np.sort(np.asarray(x, dtype=float), axis=-1)
    n = x.shape[-1]
    return {
        "gamma1": x.mean(axis=-1),
        "delta": np.sum(x * x, axis=-1) / n**2,
        "alpha_plus1": np.maximum(x[..., -1], 0.0) / n,
        "alpha_minus1": np.maximum(-x[..., 0], 0.0) / n,
    }


# ---------------------------------------------------------------- characteristic function

def charfunc(omega: OmegaPoint, x):
    """F_omega(x) evaluated exactly for finitely many alphas."""
    x = np.asarray(x, dtype=float)
    out = np.exp(1j * omega.gamma1 * x - 0.5 * omega.gamma2 * x * x)
    for a in omega.alpha_plus:
        out = out * np.exp(-1j * a * x) / (1.0 - 1j * a * x)
    for a in omega.alpha_minus:
        out = out * np.exp(1j * a * x) / (1.0 + 1j * a * x)
    return out


# ---------------------------------------------------------------- densities

def hp_log_density_unnorm(x, p: HPParams):
    """Unnormalised log density of the Hua-Pickrell measure on W^N.

    Arg(1 + ix) is the principal branch, i.e. arctan(x).  Returns -inf (with a
    warning suppressed) on coincident coordinates.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    with np.errstate(divide="ignore"):
        logd = log_abs_vandermonde(x)
    one = -(p.s_re + n) * np.log1p(x * x) + 2.0 * p.s_im * np.arctan(x)
    return 2.0 * logd + one.sum(axis=-1)


def speed_density(x, n: int, p: HPParams, dual: bool = False):
    """Speed measure density m^{(n)} of L^{(n)}, or m_hat^{(n)} of the dual generator."""
    x = np.asarray(x, dtype=float)
    if dual:
        return (1.0 + x * x) ** (p.s_re + n - 1) * np.exp(-2.0 * p.s_im * np.arctan(x))
    return (1.0 + x * x) ** (-p.s_re - n) * np.exp(2.0 * p.s_im * np.arctan(x))


def log_speed_density(x, n: int, p: HPParams, dual: bool = False):
    x = np.asarray(x, dtype=float)
    if dual:
        return (p.s_re + n - 1) * np.log1p(x * x) - 2.0 * p.s_im * np.arctan(x)
    return -(p.s_re + n) * np.log1p(x * x) + 2.0 * p.s_im * np.arctan(x)


def as_array(x: "WeylPoint | Sequence[float] | np.ndarray") -> np.ndarray:
    return np.asarray(x.values if isinstance(x, WeylPoint) else x, dtype=float)


__all__ = [
    "WeylPoint", "HPParams", "OmegaPoint", "GTPattern", "interlaces",
    "cayley_to_angle", "angle_to_cayley", "vandermonde", "log_abs_vandermonde",
    "vandermonde_derivatives", "km_eigenvalue", "dual_constant", "embed", "embed_batch",
    "charfunc", "hp_log_density_unnorm", "speed_density", "log_speed_density", "as_array",
]

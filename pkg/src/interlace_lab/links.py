"""Markov links between levels, Gelfand-Tsetlin sampling and measure samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rmt
from .core import (
    GTPattern, HPParams, OmegaPoint, angle_to_cayley, as_array, interlaces,
    log_speed_density, speed_density, vandermonde,
)


# ---------------------------------------------------------------- links

def link_density(x, y) -> float:
    """Density N! Delta_N(y) / Delta_{N+1}(x) on the interlacing polytope."""
    x = as_array(x).reshape(-1)
    y = as_array(y).reshape(-1)
    if x.size != y.size + 1:
        raise ValueError("link_density needs len(x) == len(y) + 1")
    if np.any(np.diff(x) <= 0):
        raise ValueError("link_density needs strictly ordered x; use link_sample for ties")
    if not interlaces(y, x):
        return 0.0
    n = y.size
    return math.factorial(n) * float(vandermonde(y)) / float(vandermonde(x))


def link_sample(x, rng, size=None):
    """Eigenvalues of the N x N corner of U^* diag(x) U with U Haar on U(N+1).

    ``x`` may be a single configuration of length N+1 or a batch of shape
    (P, N+1); ``size`` draws that many samples from a single ``x``.
    """
    x = as_array(x)
    if x.ndim == 1 and size is not None:
        x = np.broadcast_to(x, (int(size), x.size))
    batch = x.ndim == 2
    xb = x if batch else x[None, :]
    p, m = xb.shape
    if m < 2:
        raise ValueError("link_sample needs a source with at least two coordinates")
    u = rmt.haar_unitary(m, rng, size=p)
    cols = u[:, :, : m - 1]
    # corner of U^* D U is cols^* D cols
    h = np.conj(np.swapaxes(cols, -1, -2)) @ (xb[:, :, None] * cols)
    y = rmt.eval_(rmt.hermitize(h))
    # eigensolver roundoff can step outside the polytope by ~1e-15; clamp
    y = np.clip(y, xb[:, :-1], xb[:, 1:])
    return y if batch else y[0]


def gt_uniform_sample(bottom, rng, size=None):
    """Uniform pattern with fixed bottom row, built by chaining links downward.

    Returns a :class:`GTPattern` for a single draw, otherwise a list of arrays,
    ``levels[n-1]`` of shape (P, n).
    """
    b = as_array(bottom)
    if b.ndim == 1 and size is not None:
        b = np.broadcast_to(b, (int(size), b.size)).copy()
    levels = [b]
    cur = b
    while cur.shape[-1] > 1:
        cur = link_sample(cur, rng)
        levels.append(cur)
    levels = levels[::-1]
    if b.ndim == 1:
        return GTPattern(levels)
    return levels


def lambda_hat_density(x, y, p: HPParams) -> float:
    """Unnormalised dual-weighted kernel prod_i m_hat^{(N+1)}(y_i) 1(y interlaces x)."""
    x = as_array(x).reshape(-1)
    y = as_array(y).reshape(-1)
    if not interlaces(y, x):
        return 0.0
    return float(np.prod(speed_density(y, x.size, p, dual=True)))


def h_function(y, p: HPParams):
    """h_{N,s}(y) = prod_i 1/m_hat^{(N+1)}(y_i) * Delta_N(y)."""
    y = as_array(y)
    n = y.shape[-1]
    return np.exp(-log_speed_density(y, n + 1, p, dual=True).sum(axis=-1)) * vandermonde(y)


def h_identity_gap(x, p: HPParams) -> float:
    """Relative gap of (Lambda_{N,N+1} h)(x) against Delta_{N+1}(x)/N!, by quadrature (N <= 2)."""
    from scipy import integrate

    x = as_array(x).reshape(-1)
    n = x.size - 1
    target = float(vandermonde(x)) / math.factorial(n)
    if n == 1:
        val, _ = integrate.quad(lambda a: lambda_hat_density(x, [a], p) * h_function([a], p), x[0], x[1],
                                epsabs=1e-13, epsrel=1e-12)
    elif n == 2:
        def inner(b):
            return integrate.quad(
                lambda a: lambda_hat_density(x, [a, b], p) * h_function([a, b], p), x[0], x[1],
                epsabs=1e-13, epsrel=1e-12)[0]
        val, _ = integrate.quad(inner, x[1], x[2], epsabs=1e-13, epsrel=1e-12)
    else:
        raise ValueError("quadrature check implemented for N <= 2")
    return abs(val - target) / abs(target)


def boundary_link_sample(omega: OmegaPoint, N: int, rng, size=None):
    """Draw from Lambda_N^infty(omega, .) as eigenvalues of the ergodic matrix model."""
    return rmt.eval_(rmt.ergodic_matrix_sample(omega, N, rng, size))


# ---------------------------------------------------------------- measures

@dataclass(frozen=True)
class MHConfig:
    """Metropolis-Hastings settings; ``scale=None`` means 0.5/sqrt(N)."""

    scale: float | None = None
    burn_in: int = 10_000
    thin: int = 10
    chains: int = 2000


def cue_sample(N: int, rng, size=None):
    """Ascending eigenangles in (-pi, pi] of Haar unitaries."""
    u = rmt.haar_unitary(N, rng, size)
    return np.sort(np.angle(np.linalg.eigvals(u)), axis=-1)


def _mh_angles(p: HPParams, rng, n_out: int, cfg: MHConfig):
    """Single-site random-walk Metropolis in Cayley angle coordinates.

    The chain lives on the circle, where the Hua-Pickrell law has a bounded
    density (the Cauchy-like tails in x become a neighbourhood of the angle
    pi).  The target is hp_log_density_unnorm pulled back by x = tan(theta/2),
    i.e. it includes the Jacobian prod (1 + x_j^2)/2.  Proposals wrap around
    the circle and are symmetric.
    """
    N = p.N
    scale = cfg.scale if cfg.scale is not None else 0.5 / math.sqrt(N)
    chains = max(1, min(cfg.chains, n_out))
    per_chain = -(-n_out // chains)
    theta = np.sort(rng.uniform(-np.pi, np.pi, (chains, N)), axis=1)
    x = angle_to_cayley(theta)
    a_self = 1.0 - p.s_re - N  # exponent of (1 + x^2) after the Jacobian
    out = np.empty((chains, per_chain, N))
    total = cfg.burn_in + per_chain * cfg.thin
    rows = np.arange(chains)
    for sweep in range(total):
        for k in range(N):
            prop = theta[:, k] + scale * rng.standard_normal(chains)
            prop = (prop + np.pi) % (2.0 * np.pi) - np.pi
            xn = angle_to_cayley(prop)
            xo = x[:, k]
            others = np.delete(x, k, axis=1)
            with np.errstate(divide="ignore"):
                dlog = 2.0 * np.sum(np.log(np.abs(xn[:, None] - others)) - np.log(np.abs(xo[:, None] - others)),
                                    axis=1)
            dlog += a_self * (np.log1p(xn * xn) - np.log1p(xo * xo))
            dlog += 2.0 * p.s_im * (np.arctan(xn) - np.arctan(xo))
            acc = np.log(rng.uniform(size=chains)) < dlog
            theta[acc, k] = prop[acc]
            x[acc, k] = xn[acc]
        done = sweep + 1 - cfg.burn_in
        if done > 0 and done % cfg.thin == 0:
            out[rows, done // cfg.thin - 1] = np.sort(x, axis=1)
    return out.reshape(-1, N)[:n_out]


def hp_sample(p: HPParams, method: str, rng, size=None, mh_config: MHConfig | None = None):
    """Draw from the Hua-Pickrell measure on W^N.

    ``cue-cayley`` is exact and requires s = 0; ``mh`` handles any Re s > -1/2.
    """
    n_out = 1 if size is None else int(size)
    if method == "cue-cayley":
        if p.s_re != 0 or p.s_im != 0:
            raise ValueError("cue-cayley sampling is exact only for s = 0; use method='mh'")
        # eigenvalues of i(I - U)(I + U)^{-1} are tan(theta/2): one Hermitian solve
        u = rmt.haar_unitary(p.N, rng, n_out)
        eye = np.eye(p.N)
        x = np.linalg.eigvalsh(rmt.hermitize(1j * np.linalg.solve(eye + u, eye - u)))
    elif method == "mh":
        p.require_finite_measure()
        x = _mh_angles(p, rng, n_out, mh_config or MHConfig())
    else:
        raise ValueError(f"unknown hp_sample method {method!r}")
    return x[0] if size is None else x


__all__ = [
    "link_density", "link_sample", "gt_uniform_sample", "lambda_hat_density", "h_function",
    "h_identity_gap", "boundary_link_sample", "MHConfig", "cue_sample", "hp_sample",
]

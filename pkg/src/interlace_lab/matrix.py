"""Hermitian matrix-valued Hua-Pickrell process and its unitary Cayley image.

The process solves

    dX = g(X) dW h(X) + h(X) dW* g(X) + (b(X) + alpha Tr(X) I) dt

with matrix functions defined spectrally and W a complex matrix Brownian
motion whose real and imaginary entries are independent standard Brownian
motions.  The Hua-Pickrell choice is g = 1, h(x) = sqrt((1+x^2)/2),
b(x) = (-N - 2 Re s) x + 2 Im s, alpha = 1; its eigenvalues then solve the
interacting particle system of :mod:`interlace_lab.sde`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import links, rmt
from .core import HPParams


def _hp_h(x):
    return np.sqrt(0.5 * (1.0 + x * x))


@dataclass(frozen=True)
class MatrixSDESpec:
    """Coefficients of the general matrix equation.

    ``g``, ``h`` default to the Hua-Pickrell choice (``g=None`` means the
    constant 1).  ``b`` defaults to the linear map with slope ``linear_coef``
    and intercept 2 Im s; ``linear_coef=None`` means -N - 2 Re s.
    """

    N: int
    p: HPParams = HPParams()
    dt_base: float = 5e-4
    g: Callable | None = None
    h: Callable | None = None
    b: Callable | None = None
    alpha: float = 1.0
    linear_coef: float | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.dt_base > 0:
            raise ValueError("dt_base must be positive")

    @property
    def slope(self) -> float:
        return -self.N - 2.0 * self.p.s_re if self.linear_coef is None else self.linear_coef

    def g_fn(self, x):
        return np.ones_like(x) if self.g is None else self.g(x)

    def h_fn(self, x):
        return _hp_h(x) if self.h is None else self.h(x)

    def b_fn(self, x):
        if self.b is not None:
            return self.b(x)
        return self.slope * x + 2.0 * self.p.s_im


def _spectral(v, vals):
    """V diag(vals) V* for stacks."""
    return (v * vals[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def matrix_drift_and_factors(X, spec: MatrixSDESpec):
    """Return (drift, G, H, eigenvalues) with G = g(X), H = h(X) (G is None when g = 1)."""
    w, v = np.linalg.eigh(X)
    H = _spectral(v, spec.h_fn(w))
    G = None if spec.g is None else _spectral(v, spec.g_fn(w))
    n = X.shape[-1]
    tr = np.trace(X, axis1=-2, axis2=-1).real
    drift = _spectral(v, spec.b_fn(w)) + spec.alpha * tr[..., None, None] * np.eye(n)
    return drift, G, H, w


def matrix_step(X, spec: MatrixSDESpec, rng, dt: float | None = None):
    """One Euler step for a Hermitian matrix or a stack of them.

    With the default Hua-Pickrell coefficients no eigendecomposition is
    needed: the increment's law depends on h(X) only through
    h(X)^2 = (I + X^2)/2, so ``dW B + B* dW*`` with B the adjoint Cholesky
    factor of h(X)^2 has the same distribution as ``dW h(X) + h(X) dW*``.
    """
    dt = spec.dt_base if dt is None else dt
    X = np.asarray(X, dtype=complex)
    dW = np.sqrt(dt) * (rng.standard_normal(X.shape) + 1j * rng.standard_normal(X.shape))
    if spec.g is None and spec.h is None and spec.b is None:
        eye = np.eye(X.shape[-1])
        B = np.conj(np.swapaxes(np.linalg.cholesky(0.5 * (eye + X @ X)), -1, -2))
        noise = dW @ B
        noise = noise + np.conj(np.swapaxes(noise, -1, -2))
        tr = np.trace(X, axis1=-2, axis2=-1).real
        drift = spec.slope * X + (2.0 * spec.p.s_im + spec.alpha * tr)[..., None, None] * eye
        return rmt.hermitize(X + noise + drift * dt)
    drift, G, H, _ = matrix_drift_and_factors(X, spec)
    dWs = np.conj(np.swapaxes(dW, -1, -2))
    if G is None:
        noise = dW @ H + H @ dWs
    else:
        noise = G @ dW @ H + H @ dWs @ G
    return rmt.hermitize(X + noise + drift * dt)


def eigenvalue_drift(lam, spec: MatrixSDESpec):
    """Drift of the closed eigenvalue system of the general matrix equation.

    b(l_i) + alpha sum_k l_k + 2 sum_{k != i} G(l_i, l_k) / (l_i - l_k) with
    G(x, y) = g(x)^2 h(y)^2 + g(y)^2 h(x)^2.
    """
    lam = np.asarray(lam, dtype=float)
    g2 = spec.g_fn(lam) ** 2
    h2 = spec.h_fn(lam) ** 2
    Gm = g2[..., :, None] * h2[..., None, :] + g2[..., None, :] * h2[..., :, None]
    d = lam[..., :, None] - lam[..., None, :]
    n = lam.shape[-1]
    idx = np.arange(n)
    d[..., idx, idx] = np.inf
    inter = 2.0 * (Gm / d).sum(axis=-1)
    return spec.b_fn(lam) + spec.alpha * lam.sum(axis=-1, keepdims=True) + inter


def eigenvalue_diffusion(lam, spec: MatrixSDESpec):
    """Noise coefficient 2 h(l) g(l) of each eigenvalue."""
    lam = np.asarray(lam, dtype=float)
    return 2.0 * spec.h_fn(lam) * spec.g_fn(lam)


@dataclass
class MatrixPath:
    """Eigenvalue snapshots (K, P, N) at ``times`` plus the final matrices."""

    times: np.ndarray
    eigenvalues: np.ndarray
    final: np.ndarray
    seed: object = None

    def to_csv(self, path, path_index: int = 0):
        from .sde import PathRecord

        PathRecord(self.times, self.eigenvalues, self.seed, 0.0, 0).to_csv(path, path_index)


def matrix_simulate(spec: MatrixSDESpec, X0, T: float, rng, record_times=(), check_order: bool = True,
                    seed=None) -> MatrixPath:
    """Fixed-step Euler path with eigenvalue snapshots.

    With ``check_order`` the snapshots must have strictly ordered eigenvalues
    (gap tolerance 0); a violation raises.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    X = np.asarray(X0, dtype=complex)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.shape[-1] != spec.N:
        raise ValueError(f"matrix size {X.shape[-1]} does not match spec.N={spec.N}")
    if not rmt.is_hermitian(X, 1e-10):
        raise ValueError("initial matrix is not Hermitian")
    X = rmt.hermitize(X)
    rec_t = np.unique(np.concatenate([[0.0], np.asarray(record_times, dtype=float), [T]]))
    rec_t = rec_t[(rec_t >= 0) & (rec_t <= T)]
    eig = np.empty((rec_t.size, X.shape[0], spec.N))
    eig[0] = rmt.eval_(X)
    t = 0.0
    for k in range(1, rec_t.size):
        target = rec_t[k]
        while t < target - 1e-15 * max(1.0, target):
            dt = min(spec.dt_base, target - t)
            X = matrix_step(X, spec, rng, dt)
            t += dt
        t = target
        eig[k] = rmt.eval_(X)
        if check_order and spec.N > 1 and np.any(np.diff(eig[k], axis=-1) <= 0):
            raise RuntimeError(f"eigenvalue collision in a snapshot at t={t:.4g}")
    return MatrixPath(rec_t, eig, X[0] if single else X, seed)


def unitary_image(X):
    """Cayley image (iI - X)(iI + X)^{-1}; the two factors commute."""
    X = np.asarray(X, dtype=complex)
    eye = np.eye(X.shape[-1])
    return np.linalg.solve(1j * eye + X, 1j * eye - X)


def hermitian_from_unitary(U):
    """Inverse Cayley map i(I - U)(I + U)^{-1} (needs -1 outside the spectrum)."""
    U = np.asarray(U, dtype=complex)
    eye = np.eye(U.shape[-1])
    return rmt.hermitize(1j * np.linalg.solve(eye + U, eye - U))


def matrix_hp_sample(p: HPParams, rng, size=None, method: str | None = None):
    """Draw from the matrix Hua-Pickrell measure: Haar eigenvectors, Hua-Pickrell eigenvalues.

    For s = 0 the default is the exact inverse Cayley image of a Haar unitary.
    """
    if method is None:
        method = "cayley" if p.s_re == 0 and p.s_im == 0 else "mh"
    if method == "cayley":
        if p.s_re != 0 or p.s_im != 0:
            raise ValueError("the Cayley construction is exact only for s = 0")
        return hermitian_from_unitary(rmt.haar_unitary(p.N, rng, size))
    lam = links.hp_sample(p, method, rng, size)
    v = rmt.haar_unitary(p.N, rng, size)
    return rmt.hermitize(_spectral(v, lam))


def matrix_to_json(X) -> str:
    """Row-major [re, im] pairs."""
    X = np.asarray(X, dtype=complex)
    return json.dumps([[[float(z.real), float(z.imag)] for z in row] for row in X])


def matrix_from_json(text: str) -> np.ndarray:
    data = json.loads(text)
    return np.array([[complex(a, b) for a, b in row] for row in data])


def drift_constant_arbitration(p: HPParams, x0: float = 1.0, T: float = 0.5, paths: int = 200_000,
                               rng=None, dt: float = 1e-3) -> dict:
    """Decide the linear drift constant at N = 1 from the mean of the scalar matrix equation.

    At N = 1 the matrix equation is scalar with mean slope (c + 1) E[X] + 2 Im s,
    where c is the linear coefficient of b.  The candidates are c = -N - 2 Re s
    (the eigenvalue system is reproduced) and c = 1 - N - 2 Re s.  Returns the
    Monte-Carlo mean, its standard error, both predictions and their z-scores.
    """
    if rng is None:
        rng = np.random.default_rng()
    cands = {"-N-2Re(s)": -1.0 - 2.0 * p.s_re, "1-N-2Re(s)": -2.0 * p.s_re}
    spec = MatrixSDESpec(1, HPParams(p.s_re, p.s_im, 1), dt_base=dt)
    X0 = np.full((paths, 1, 1), x0, dtype=complex)
    out = matrix_simulate(spec, X0, T, rng).eigenvalues[-1, :, 0]
    mean = float(out.mean())
    se = float(out.std(ddof=1) / np.sqrt(paths))
    res = {"mean": mean, "se": se, "predictions": {}, "z": {}}
    for name, c in cands.items():
        a = c + 1.0  # alpha Tr X adds X itself
        pred = x0 * np.exp(a * T) + (2.0 * p.s_im / a) * (np.exp(a * T) - 1.0) if a != 0 else x0 + 2.0 * p.s_im * T
        res["predictions"][name] = float(pred)
        res["z"][name] = abs(mean - pred) / se
    res["selected"] = min(res["z"], key=res["z"].get)
    return res


__all__ = [
    "MatrixSDESpec", "matrix_drift_and_factors", "matrix_step", "eigenvalue_drift", "eigenvalue_diffusion",
    "MatrixPath", "matrix_simulate", "unitary_image", "hermitian_from_unitary", "matrix_hp_sample",
    "matrix_to_json", "matrix_from_json", "drift_constant_arbitration",
]

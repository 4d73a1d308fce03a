"""Random matrix primitives: Haar unitaries, GUE, eigenvalues, corners, square roots.

Every sampler takes a ``numpy.random.Generator`` and an optional ``size``; with
``size=None`` a single matrix is returned, otherwise a stack of shape
``(size, N, N)``.
"""

from __future__ import annotations

import numpy as np

from .core import OmegaPoint

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
PSD_CLAMP = 1e-10
PSD_FAIL = 1e-6


def _shape(size, *tail):
    return tail if size is None else (int(size),) + tail


def complex_normal(rng, shape, var=1.0):
    """Complex Gaussian with E|z|^2 = var (real and imaginary parts each var/2)."""
    sd = np.sqrt(0.5 * var)
    return sd * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def haar_unitary(N: int, rng, size=None):
    """Haar unitary by QR of a complex Ginibre matrix with the phase fix of R's diagonal."""
    if N < 1:
        raise ValueError("N must be >= 1")
    z = complex_normal(rng, _shape(size, N, N))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ad = np.abs(d)
    if np.any(ad == 0):
        # rank deficient draw, probability zero; redraw
        return haar_unitary(N, rng, size)
    return q * (d / ad)[..., None, :]


def hermitize(h):
    h = np.asarray(h)
    return 0.5 * (h + np.conj(np.swapaxes(h, -1, -2)))


def is_hermitian(h, tol=HERMITIAN_TOL) -> bool:
    h = np.asarray(h)
    return bool(np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))), initial=0.0) <= tol)


def is_unitary(u, tol=UNITARY_TOL) -> bool:
    u = np.asarray(u)
    eye = np.eye(u.shape[-1])
    prod = u @ np.conj(np.swapaxes(u, -1, -2))
    return bool(np.max(np.abs(prod - eye)) <= tol)


def eval_(h):
    """Ascending eigenvalues of a Hermitian matrix (or stack)."""
    try:
        return np.linalg.eigvalsh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - not expected on Hermitian input
        raise RuntimeError(f"eigensolver failed: {exc}") from exc


# ``eval`` shadows a builtin, keep both spellings available
eval = eval_  # noqa: A001


def corner(h, k: int):
    h = np.asarray(h)
    dim = h.shape[-1]
    if not 1 <= k <= dim:
        raise ValueError(f"corner size {k} outside 1..{dim}")
    return h[..., :k, :k]


def gue_sample(N: int, variance: float, rng, size=None, convention: str = "invariant"):
    """Gaussian Hermitian matrix with diagonal entries N(0, variance).

    ``convention="invariant"`` (default) gives off-diagonal real and imaginary
    parts variance/2 each, the unitarily invariant ensemble with
    E[Tr X^2] = variance * N^2.  ``convention="literal"`` gives them the full
    variance, so E[Tr X^2] = variance * N * (2N - 1); that ensemble is not
    unitarily invariant and is kept only to demonstrate why it breaks coherency.
    """
    if variance < 0:
        raise ValueError("variance must be >= 0")
    if convention not in ("invariant", "literal"):
        raise ValueError(f"unknown GUE convention {convention!r}")
    shape = _shape(size, N, N)
    off_var = variance if convention == "literal" else 0.5 * variance
    a = np.sqrt(off_var) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    upper = np.triu(a, 1)
    diag = np.sqrt(variance) * rng.standard_normal(_shape(size, N))
    h = upper + np.conj(np.swapaxes(upper, -1, -2))
    idx = np.arange(N)
    h[..., idx, idx] = diag
    return h


def hermitian_sqrt(h):
    """Principal square root of a Hermitian positive semidefinite matrix (or stack)."""
    w, v = np.linalg.eigh(h)
    if np.any(w < -PSD_FAIL):
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3g})")
    w = np.where(w < PSD_CLAMP, np.maximum(w, 0.0), w)
    return (v * np.sqrt(w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def ergodic_matrix_sample(omega: OmegaPoint, N: int, rng, size=None):
    """Draw from the unitarily invariant ergodic law with parameters omega, cut to N x N.

    gamma1 I + G^{gamma2} + sum_k a_k^+ (zeta_k^* zeta_k - I) - sum_k a_k^- (xi_k^* xi_k - I),
    with zeta_k, xi_k rows of i.i.d. complex normals, E|zeta_j|^2 = 1.
    """
    eye = np.eye(N)
    h = np.broadcast_to(omega.gamma1 * eye, _shape(size, N, N)).astype(complex)
    g2 = omega.gamma2
    if g2 > 0:
        h = h + gue_sample(N, g2, rng, size)
    for sign, alphas in ((1.0, omega.alpha_plus), (-1.0, omega.alpha_minus)):
        for a in alphas:
            if a == 0:
                continue
            z = complex_normal(rng, _shape(size, 1, N))
            h = h + sign * a * (np.conj(np.swapaxes(z, -1, -2)) @ z - eye)
    return hermitize(h)


__all__ = [
    "complex_normal", "haar_unitary", "hermitize", "is_hermitian", "is_unitary", "eval_",
    "corner", "gue_sample", "hermitian_sqrt", "ergodic_matrix_sample",
]

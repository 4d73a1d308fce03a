"""Pure numpy/Python twins of the compiled kernels in ``_kernels.pyx``.

Same signatures, same randomness consumption, same acceptance rules; results
agree with the compiled versions up to floating point summation order.
"""

from __future__ import annotations

import numpy as np

KIND_HP = 0
KIND_DBM = 1
KIND_OU = 2
KIND_CIRCLE = 3
KIND_LINEAR1D = 4


def _sigma(kind, x):
    if kind in (KIND_HP, KIND_LINEAR1D):
        return np.sqrt(2.0 * (x * x + 1.0))
    if kind == KIND_CIRCLE:
        return 2.0 * np.sqrt(2.0) * np.cos(0.5 * x)
    return np.ones_like(x)


def _pair_sum(z):
    """sum_{j != i} 1/(z_i - z_j) along the last axis."""
    d = z[..., :, None] - z[..., None, :]
    n = z.shape[-1]
    idx = np.arange(n)
    d[..., idx, idx] = np.inf
    return (1.0 / d).sum(axis=-1)


def euler_try(x, dw, dt, kind, prm, bound_mult, sigma_floor, gap_coef):
    x = np.asarray(x, dtype=float)
    if kind != KIND_LINEAR1D and x.shape[-1] > 1:
        s2 = _sigma(kind, x) ** 2
        g = np.diff(x, axis=-1)
        h_gap = np.min(gap_coef * g * g / (s2[..., :-1] + s2[..., 1:] + 1e-300), axis=-1)
    else:
        h_gap = np.full(x.shape[0], np.inf)
    if kind == KIND_LINEAR1D:
        drift = prm[0] * x + prm[1]
    elif kind == KIND_CIRCLE:
        half = 0.5 * x
        drift = (prm[0] * np.sin(half) * np.cos(half) + prm[1] * np.cos(half) ** 2
                 + 4.0 * _pair_sum(np.tan(half)))
    else:
        inter = _pair_sum(x)
        if kind == KIND_HP:
            drift = prm[0] * x + prm[1] + 2.0 * (x * x + 1.0) * inter
        elif kind == KIND_DBM:
            drift = inter
        else:
            drift = inter - prm[0] * x
    sig = _sigma(kind, x)
    with np.errstate(invalid="ignore", over="ignore"):
        new = x + drift * dt + sig * dw
        lim = bound_mult * np.maximum(np.abs(sig), sigma_floor) * np.sqrt(dt)
        ok = np.all(np.isfinite(new) & (np.abs(new - x) <= lim), axis=-1)
        if kind == KIND_CIRCLE:
            ok &= np.all(np.abs(new) < np.pi - 1e-6, axis=-1)
        if kind != KIND_LINEAR1D and x.shape[-1] > 1:
            ok &= np.all(np.diff(new, axis=-1) > 0, axis=-1)
    return new, ok, h_gap


def reflected_step(x, dw, dt, depth, lin, const, coincide_tol, mirror=0):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    stop = np.zeros(x.shape[0], dtype=bool)
    for n in range(1, depth + 1):
        off = n * (n - 1) // 2
        offb = (n - 1) * (n - 2) // 2
        xi = x[:, off:off + n]
        new = xi + (lin[n - 1] * xi + const[n - 1]) * dt + np.sqrt(2.0 * (xi * xi + 1.0)) * dw[:, off:off + n]
        if n > 1:
            below = out[:, offb:offb + n - 1]
            lo = np.concatenate([np.full((x.shape[0], 1), -1e308), below], axis=1)
            hi = np.concatenate([below, np.full((x.shape[0], 1), 1e308)], axis=1)
            pinched = hi - lo <= coincide_tol
            if mirror:
                with np.errstate(over="ignore"):  # sentinel barriers overflow in unused branches
                    new = np.where(new < lo, 2.0 * lo - new, np.where(new > hi, 2.0 * hi - new, new))
            new = np.where(pinched, 0.5 * (lo + hi), np.clip(new, lo, hi))
        out[:, off:off + n] = new
        if n > 1:
            stop |= np.any(np.diff(new, axis=1) <= coincide_tol, axis=1)
    return out, stop


def pushblock_run(state, depth, prm, t0, T, exps, unifs):
    u, u2, v, v2 = (float(a) for a in prm)
    lev = [n for n in range(1, depth + 1) for _ in range(n)]
    idx = [i for n in range(1, depth + 1) for i in range(n)]
    M = len(state)
    t = float(t0)
    used = 0
    status = 1
    ndraw = len(exps)
    while used < ndraw:
        rates = []
        total = 0.0
        bad = False
        for k in range(M):
            xk = float(state[k])
            r1 = (xk - (u + lev[k] - 1)) * (xk - (u2 + lev[k] - 1))
            r2 = (xk + v) * (xk + v2)
            if r1 < 0 or r2 < 0:
                bad = True
                break
            rates.append(r1)
            rates.append(r2)
            total += r1 + r2
        if bad:
            status = 2
            break
        if total <= 0:
            status = 3
            break
        t = t + exps[used] / total
        target = unifs[used] * total
        used += 1
        if t >= T:
            t = T
            status = 0
            break
        acc = 0.0
        j = 2 * M - 1
        for m in range(2 * M):
            acc += rates[m]
            if target < acc:
                j = m
                break
        k = j // 2
        nn, ii = lev[k], idx[k]
        off = nn * (nn - 1) // 2
        old = state[k]
        if j % 2 == 0:
            if nn > 1 and ii < nn - 1 and state[(nn - 1) * (nn - 2) // 2 + ii] == old:
                continue
            state[k] = old + 1
            while nn < depth:
                m = (nn + 1) * nn // 2 + ii + 1
                if state[m] == state[off + ii]:
                    state[m] += 1
                    nn += 1
                    ii += 1
                    off = nn * (nn - 1) // 2
                else:
                    break
        else:
            if nn > 1 and ii > 0 and state[(nn - 1) * (nn - 2) // 2 + ii - 1] == old - 1:
                continue
            state[k] = old - 1
            while nn < depth:
                m = (nn + 1) * nn // 2 + ii
                if state[m] == state[off + ii] + 1:
                    state[m] -= 1
                    nn += 1
                    off = nn * (nn - 1) // 2
                else:
                    break
    return t, used, status

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.  Semantics mirror ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, sin, cos, tan, isfinite, M_PI

cnp.import_array()

cdef enum:
    KIND_HP = 0
    KIND_DBM = 1
    KIND_OU = 2
    KIND_CIRCLE = 3
    KIND_LINEAR1D = 4


cdef inline double _sigma(int kind, double x) nogil:
    if kind == KIND_HP or kind == KIND_LINEAR1D:
        return sqrt(2.0 * (x * x + 1.0))
    if kind == KIND_CIRCLE:
        return 2.0 * sqrt(2.0) * cos(0.5 * x)
    return 1.0


def euler_try(double[:, ::1] x, double[:, ::1] dw, double dt, int kind,
              double[::1] prm, double bound_mult, double sigma_floor, double gap_coef):
    """One Euler-Maruyama trial step for a batch of paths.

    Returns (x_new, ok, h_gap).  ok[p] is 1 when the proposal is finite, keeps
    strict ordering (interacting kinds), keeps angles inside (-pi, pi)
    (circle) and moves every particle by at most bound_mult*sigma*sqrt(dt).
    h_gap[p] = gap_coef * min_i gap_i^2 / (sigma_i^2 + sigma_{i+1}^2) is the
    largest step the current configuration supports (inf without interaction).
    """
    cdef Py_ssize_t P = x.shape[0], N = x.shape[1], p, i, j
    out_np = np.empty((P, N), dtype=np.float64)
    ok_np = np.ones(P, dtype=np.uint8)
    hg_np = np.full(P, np.inf, dtype=np.float64)
    inter_np = np.empty(N, dtype=np.float64)
    tv_np = np.empty(N, dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef unsigned char[::1] ok = ok_np
    cdef double[::1] hg = hg_np
    cdef double[::1] inter = inter_np
    cdef double[::1] tv = tv_np
    cdef double xi, drift, sig, new, sq = sqrt(dt), lim, g, s1, s2, hcur, r
    cdef bint interacting = kind != KIND_LINEAR1D
    with nogil:
        for p in range(P):
            for i in range(N):
                inter[i] = 0.0
            if interacting:
                for i in range(N - 1):
                    g = x[p, i + 1] - x[p, i]
                    s1 = _sigma(kind, x[p, i])
                    s2 = _sigma(kind, x[p, i + 1])
                    hcur = gap_coef * g * g / (s1 * s1 + s2 * s2 + 1e-300)
                    if hcur < hg[p]:
                        hg[p] = hcur
                # each pair once: 1/(z_i - z_j) enters i with +, j with -
                for i in range(N):
                    tv[i] = tan(0.5 * x[p, i]) if kind == KIND_CIRCLE else x[p, i]
                for i in range(N):
                    for j in range(i + 1, N):
                        r = 1.0 / (tv[i] - tv[j])
                        inter[i] += r
                        inter[j] -= r
                if kind == KIND_CIRCLE:
                    for i in range(N):
                        inter[i] *= 4.0
            for i in range(N):
                xi = x[p, i]
                if kind == KIND_HP:
                    drift = prm[0] * xi + prm[1] + 2.0 * (xi * xi + 1.0) * inter[i]
                elif kind == KIND_DBM:
                    drift = inter[i]
                elif kind == KIND_OU:
                    drift = inter[i] - prm[0] * xi
                elif kind == KIND_CIRCLE:
                    drift = prm[0] * sin(0.5 * xi) * cos(0.5 * xi) + prm[1] * cos(0.5 * xi) * cos(0.5 * xi) + inter[i]
                else:
                    drift = prm[0] * xi + prm[1]
                sig = _sigma(kind, xi)
                new = xi + drift * dt + sig * dw[p, i]
                out[p, i] = new
                if fabs(sig) < sigma_floor:
                    sig = sigma_floor
                lim = bound_mult * fabs(sig) * sq
                if not isfinite(new) or fabs(new - xi) > lim:
                    ok[p] = 0
                if kind == KIND_CIRCLE and fabs(new) >= M_PI - 1e-6:
                    ok[p] = 0
            if interacting and ok[p]:
                for i in range(N - 1):
                    if not out[p, i] < out[p, i + 1]:
                        ok[p] = 0
                        break
    return out_np, ok_np.view(np.bool_), hg_np


def reflected_step(double[:, ::1] x, double[:, ::1] dw, double dt, int depth,
                   double[::1] lin, double[::1] const, double coincide_tol, int mirror=0):
    """Euler step plus projection for a batch of flattened interlacing patterns.

    Level n occupies columns n(n-1)/2 .. n(n-1)/2 + n - 1 and drifts with
    lin[n-1]*x + const[n-1].  Levels are updated
    in ascending order, each kept inside the intervals cut out by the
    already-updated level below: by clamping, or with mirror=1 by reflecting
    the overshoot (clamping only if the reflection overshoots the far side).  Returns (x_new, stopped) where stopped[p]
    flags two same-level particles closer than coincide_tol.
    """
    cdef Py_ssize_t P = x.shape[0], M = x.shape[1], p, n, i, off, offb
    out_np = np.empty((P, M), dtype=np.float64)
    stop_np = np.zeros(P, dtype=np.uint8)
    cdef double[:, ::1] out = out_np
    cdef unsigned char[::1] stop = stop_np
    cdef double xi, new, lo, hi, a, b
    with nogil:
        for p in range(P):
            for n in range(1, depth + 1):
                off = n * (n - 1) // 2
                offb = (n - 1) * (n - 2) // 2
                a = lin[n - 1]
                b = const[n - 1]
                for i in range(n):
                    xi = x[p, off + i]
                    new = xi + (a * xi + b) * dt + sqrt(2.0 * (xi * xi + 1.0)) * dw[p, off + i]
                    if n > 1:
                        lo = -1e308 if i == 0 else out[p, offb + i - 1]
                        hi = 1e308 if i == n - 1 else out[p, offb + i]
                        if hi - lo <= coincide_tol:
                            new = 0.5 * (lo + hi)
                        elif new < lo:
                            new = 2.0 * lo - new if mirror else lo
                            if new > hi:
                                new = hi
                        elif new > hi:
                            new = 2.0 * hi - new if mirror else hi
                            if new < lo:
                                new = lo
                    out[p, off + i] = new
                for i in range(n - 1):
                    if out[p, off + i + 1] - out[p, off + i] <= coincide_tol:
                        stop[p] = 1
    return out_np, stop_np.view(np.bool_)


cdef inline double _rate_right(double x, int n, double u, double u2) nogil:
    return (x - (u + n - 1)) * (x - (u2 + n - 1))


cdef inline double _rate_left(double x, double v, double v2) nogil:
    return (x + v) * (x + v2)


def pushblock_run(long long[::1] state, int depth, double[::1] prm, double t0, double T,
                  double[::1] exps, double[::1] unifs):
    """Advance a push-block chain from time t0 until T or until the draws run out.

    ``state`` is the flattened integer pattern (modified in place).  Each event
    consumes one Exp(1) and one Uniform(0,1).  Returns (t, used, status) with
    status 0 = reached T, 1 = draws exhausted, 2 = negative rate, 3 = all rates zero.
    """
    cdef Py_ssize_t M = state.shape[0], k, n, i, off, used = 0, ndraw = exps.shape[0]
    cdef Py_ssize_t lev[1024]
    cdef Py_ssize_t idx[1024]
    cdef double rates[2048]
    cdef double u = prm[0], u2 = prm[1], v = prm[2], v2 = prm[3], t = t0, total, target, acc, r
    cdef int status = 1, dirn
    cdef long long old
    cdef Py_ssize_t nn, ii, m, j
    if M > 1024:
        raise ValueError("pattern too large for the compiled push-block kernel")
    k = 0
    for n in range(1, depth + 1):
        for i in range(n):
            lev[k] = n
            idx[k] = i
            k += 1
    with nogil:
        while used < ndraw:
            total = 0.0
            for k in range(M):
                r = _rate_right(<double>state[k], <int>lev[k], u, u2)
                rates[2 * k] = r
                if r < 0:
                    status = 2
                    break
                total += r
                r = _rate_left(<double>state[k], v, v2)
                rates[2 * k + 1] = r
                if r < 0:
                    status = 2
                    break
                total += r
            if status == 2:
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
            dirn = 1 if j % 2 == 0 else -1
            nn = lev[k]
            ii = idx[k]
            off = nn * (nn - 1) // 2
            old = state[k]
            if dirn == 1:
                # blocked by the level below: x^{n-1}_i == x^n_i
                if nn > 1 and ii < nn - 1 and state[(nn - 1) * (nn - 2) // 2 + ii] == old:
                    continue
                state[k] = old + 1
                # push x^{n+1}_{i+1} and upward while interlacing breaks
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
                # blocked by the level below: x^{n-1}_{i-1} == x^n_i - 1
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

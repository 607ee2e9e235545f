# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched kernels; same contracts as ``_pykernels``.

All array arguments must be C-contiguous float64 (``kernels`` takes care of
that before dispatching here).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp, sqrt, log, M_PI

cnp.import_array()


cdef inline void _trig(const double[:, ::1] omega, double[:, ::1] c, double[:, ::1] s) noexcept nogil:
    cdef Py_ssize_t n = omega.shape[0], m = omega.shape[1], b, p
    for b in range(n):
        for p in range(m):
            c[b, p] = cos(omega[b, p])
            s[b, p] = sin(omega[b, p])


def rotate_transpose(const double[:, ::1] omega, const double[:, ::1] V):
    cdef Py_ssize_t n = V.shape[0], K = V.shape[1]
    cdef Py_ssize_t b, i, j, p
    cdef double ci, si, wi, wj
    out = np.array(V, dtype=np.float64, copy=True)
    cdef double[:, ::1] W = out
    with nogil:
        for b in range(n):
            p = 0
            for i in range(K - 1):
                for j in range(i + 1, K):
                    ci = cos(omega[b, p])
                    si = sin(omega[b, p])
                    wi = W[b, i]
                    wj = W[b, j]
                    W[b, i] = ci * wi - si * wj
                    W[b, j] = si * wi + ci * wj
                    p += 1
    return out


def rotate(const double[:, ::1] omega, const double[:, ::1] V):
    cdef Py_ssize_t n = V.shape[0], K = V.shape[1]
    cdef Py_ssize_t b, i, j, p
    cdef double ci, si, wi, wj
    out = np.array(V, dtype=np.float64, copy=True)
    cdef double[:, ::1] W = out
    with nogil:
        for b in range(n):
            p = omega.shape[1] - 1
            for i in range(K - 2, -1, -1):
                for j in range(K - 1, i, -1):
                    ci = cos(omega[b, p])
                    si = sin(omega[b, p])
                    wi = W[b, i]
                    wj = W[b, j]
                    W[b, i] = ci * wi + si * wj
                    W[b, j] = -si * wi + ci * wj
                    p -= 1
    return out


def whiten(const double[:, ::1] h, const double[:, ::1] omega, const double[:, ::1] R):
    out = rotate_transpose(omega, R)
    cdef double[:, ::1] W = out
    cdef Py_ssize_t n = W.shape[0], K = W.shape[1], b, k
    with nogil:
        for b in range(n):
            for k in range(K):
                W[b, k] *= exp(-0.5 * h[b, k])
    return out


def logdens_grad(const double[:, ::1] h, const double[:, ::1] omega, const double[:, ::1] R):
    cdef Py_ssize_t n = h.shape[0], K = h.shape[1], m = omega.shape[1]
    cdef Py_ssize_t b, i, j, p, k
    cdef double ci, si, wi, wj, ai, aj, acc, sumh, il
    ld_arr = np.empty(n)
    gh_arr = np.empty((n, K))
    go_arr = np.empty((n, m))
    cdef double[::1] ld = ld_arr
    cdef double[:, ::1] gh = gh_arr
    cdef double[:, ::1] go = go_arr
    cdef double[:, ::1] c = np.empty((n, m))
    cdef double[:, ::1] s = np.empty((n, m))
    cdef double[::1] w = np.empty(K)
    cdef double[::1] a = np.empty(K)
    cdef double[::1] si_save = np.empty(m)
    cdef double[::1] sj_save = np.empty(m)
    cdef double half_log2pi = 0.5 * log(2.0 * M_PI)
    with nogil:
        _trig(omega, c, s)
        for b in range(n):
            for k in range(K):
                w[k] = R[b, k]
            p = 0
            for i in range(K - 1):
                for j in range(i + 1, K):
                    wi = w[i]
                    wj = w[j]
                    si_save[p] = wi
                    sj_save[p] = wj
                    w[i] = c[b, p] * wi - s[b, p] * wj
                    w[j] = s[b, p] * wi + c[b, p] * wj
                    p += 1
            acc = 0.0
            sumh = 0.0
            for k in range(K):
                il = exp(-h[b, k])
                acc += w[k] * w[k] * il
                sumh += h[b, k]
                gh[b, k] = -0.5 + 0.5 * w[k] * w[k] * il
                a[k] = w[k] * il
            ld[b] = -K * half_log2pi - 0.5 * sumh - 0.5 * acc
            p = m - 1
            for i in range(K - 2, -1, -1):
                for j in range(K - 1, i, -1):
                    ci = c[b, p]
                    si = s[b, p]
                    wi = si_save[p]
                    wj = sj_save[p]
                    ai = a[i]
                    aj = a[j]
                    go[b, p] = -(ai * (-si * wi - ci * wj) + aj * (ci * wi - si * wj))
                    a[i] = ci * ai + si * aj
                    a[j] = -si * ai + ci * aj
                    p -= 1
    return ld_arr, gh_arr, go_arr


def reconstruct(const double[:, ::1] h, const double[:, ::1] omega):
    cdef Py_ssize_t n = h.shape[0], K = h.shape[1]
    cdef Py_ssize_t b, i, j, p, r, q
    cdef double ci, si, xi, xj, acc
    out = np.empty((n, K, K))
    cdef double[:, :, ::1] S = out
    cdef double[:, ::1] P = np.empty((K, K))
    with nogil:
        for b in range(n):
            for r in range(K):
                for q in range(K):
                    P[r, q] = 1.0 if r == q else 0.0
            p = 0
            for i in range(K - 1):
                for j in range(i + 1, K):
                    ci = cos(omega[b, p])
                    si = sin(omega[b, p])
                    for r in range(K):
                        xi = P[r, i]
                        xj = P[r, j]
                        P[r, i] = ci * xi - si * xj
                        P[r, j] = si * xi + ci * xj
                    p += 1
            for r in range(K):
                for q in range(r, K):
                    acc = 0.0
                    for i in range(K):
                        acc += P[r, i] * P[q, i] * exp(h[b, i])
                    S[b, r, q] = acc
                    S[b, q, r] = acc
    return out


def tridiag_sample(const double[::1] phi, const double[::1] sigma, const double[::1] level,
                   double zeta, const double[:, ::1] U, const double[:, ::1] Z):
    cdef Py_ssize_t n = U.shape[0], T = U.shape[1], b, t
    cdef double a = 2.0 / zeta
    cdef double s2inv, f, dmid, dend, off, qm_end, qm_mid, d, qm, q, L
    out_arr = np.empty((n, T))
    cdef double[:, ::1] out = out_arr
    cdef double[::1] Ld = np.empty(T)
    cdef double[::1] Lo = np.empty(T)
    cdef double[::1] y = np.empty(T)
    with nogil:
        for b in range(n):
            f = phi[b]
            s2inv = 1.0 / (sigma[b] * sigma[b])
            if T == 1:
                q = (1.0 - f * f) * s2inv
                L = sqrt(a + q)
                out[b, 0] = ((a * U[b, 0] + q * level[b]) / L + Z[b, 0]) / L
                continue
            dmid = (1.0 + f * f) * s2inv
            dend = s2inv
            off = -f * s2inv
            qm_end = (1.0 - f) * s2inv * level[b]
            qm_mid = (1.0 - f) * (1.0 - f) * s2inv * level[b]
            Ld[0] = sqrt(a + dend)
            y[0] = (a * U[b, 0] + qm_end) / Ld[0]
            for t in range(1, T):
                Lo[t] = off / Ld[t - 1]
                if t == T - 1:
                    d = a + dend
                    qm = qm_end
                else:
                    d = a + dmid
                    qm = qm_mid
                Ld[t] = sqrt(d - Lo[t] * Lo[t])
                y[t] = (a * U[b, t] + qm - Lo[t] * y[t - 1]) / Ld[t]
            for t in range(T):
                y[t] += Z[b, t]
            out[b, T - 1] = y[T - 1] / Ld[T - 1]
            for t in range(T - 2, -1, -1):
                out[b, t] = (y[t] - Lo[t + 1] * out[b, t + 1]) / Ld[t]
    return out_arr

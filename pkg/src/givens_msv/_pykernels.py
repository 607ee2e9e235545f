"""NumPy reference implementation of the batched hot kernels.

Every function takes arrays batched over a leading axis (time slices, paths or
particles) and loops only over Givens pairs or time steps in Python, so each
Python-level iteration does vectorised work across the batch. The compiled
module ``_ckernels`` exposes the same functions with the same signatures.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def pair_list(K):
    return tuple((i, j) for i in range(K - 1) for j in range(i + 1, K))


def rotate_transpose(omega, V):
    """Apply P^T to each row of ``V`` (G_12^T first, lexicographic order)."""
    W = np.array(V, dtype=float, copy=True)
    K = W.shape[1]
    c = np.cos(omega)
    s = np.sin(omega)
    for p, (i, j) in enumerate(pair_list(K)):
        wi = W[:, i].copy()
        wj = W[:, j]
        W[:, i] = c[:, p] * wi - s[:, p] * wj
        W[:, j] = s[:, p] * wi + c[:, p] * wj
    return W


def rotate(omega, V):
    """Apply P to each row of ``V`` (G_{K-1,K} first)."""
    W = np.array(V, dtype=float, copy=True)
    K = W.shape[1]
    c = np.cos(omega)
    s = np.sin(omega)
    pairs = pair_list(K)
    for p in range(len(pairs) - 1, -1, -1):
        i, j = pairs[p]
        wi = W[:, i].copy()
        wj = W[:, j]
        W[:, i] = c[:, p] * wi + s[:, p] * wj
        W[:, j] = -s[:, p] * wi + c[:, p] * wj
    return W


def whiten(h, omega, R):
    return rotate_transpose(omega, R) * np.exp(-0.5 * h)


def logdens_grad(h, omega, R):
    """Log N(r | 0, P diag(e^h) P^T) and its gradients in h and omega.

    Returns ``(logdens[n], grad_h[n, K], grad_omega[n, m])``.
    """
    h = np.asarray(h, dtype=float)
    n, K = h.shape
    pairs = pair_list(K)
    m = len(pairs)
    c = np.cos(omega)
    s = np.sin(omega)

    # forward pass, keeping only the two coordinates each rotation touches
    W = np.array(R, dtype=float, copy=True)
    wi_saved = np.empty((n, m))
    wj_saved = np.empty((n, m))
    for p, (i, j) in enumerate(pairs):
        wi = W[:, i].copy()
        wj = W[:, j]
        wi_saved[:, p] = wi
        wj_saved[:, p] = wj
        W[:, i] = c[:, p] * wi - s[:, p] * wj
        W[:, j] = s[:, p] * wi + c[:, p] * wj

    inv_lam = np.exp(-h)
    v2 = W * W * inv_lam
    logdens = -0.5 * K * np.log(2.0 * np.pi) - 0.5 * h.sum(axis=1) - 0.5 * v2.sum(axis=1)
    grad_h = -0.5 + 0.5 * v2

    # backward pass: A holds G_{p+1} ... G_{m-1} Lambda^{-1} w_m
    A = W * inv_lam
    grad_omega = np.empty((n, m))
    for p in range(m - 1, -1, -1):
        i, j = pairs[p]
        wi = wi_saved[:, p]
        wj = wj_saved[:, p]
        cp = c[:, p]
        sp = s[:, p]
        ai = A[:, i].copy()
        aj = A[:, j]
        grad_omega[:, p] = -(ai * (-sp * wi - cp * wj) + aj * (cp * wi - sp * wj))
        A[:, i] = cp * ai + sp * aj
        A[:, j] = -sp * ai + cp * aj
    return logdens, grad_h, grad_omega


def reconstruct(h, omega):
    """Dense covariance matrices, shape ``(n, K, K)``."""
    h = np.asarray(h, dtype=float)
    n, K = h.shape
    P = np.broadcast_to(np.eye(K), (n, K, K)).copy()
    c = np.cos(omega)
    s = np.sin(omega)
    for p, (i, j) in enumerate(pair_list(K)):
        ci = P[:, :, i].copy()
        cj = P[:, :, j]
        cp = c[:, p, None]
        sp = s[:, p, None]
        P[:, :, i] = cp * ci - sp * cj
        P[:, :, j] = sp * ci + cp * cj
    S = P * np.exp(0.5 * h)[:, None, :]
    return S @ np.swapaxes(S, 1, 2)


def tridiag_sample(phi, sigma, level, zeta, U, Z):
    """Draw Y = L^{-T}(L^{-1}((2/zeta) U + Q M) + Z) path by path.

    ``L L^T = (2/zeta) I + Q`` with Q the AR(1) precision. ``U`` and ``Z`` have
    shape ``(n_paths, T)``; the parameter vectors have length ``n_paths``.
    """
    U = np.asarray(U, dtype=float)
    n, T = U.shape
    phi = np.asarray(phi, dtype=float)
    s2inv = 1.0 / np.asarray(sigma, dtype=float) ** 2
    a = 2.0 / zeta
    level = np.asarray(level, dtype=float)

    if T == 1:
        q = (1.0 - phi * phi) * s2inv
        L = np.sqrt(a + q)
        rhs = a * U[:, 0] + q * level
        return ((rhs / L + Z[:, 0]) / L)[:, None]

    diag_mid = (1.0 + phi * phi) * s2inv
    diag_end = s2inv
    off = -phi * s2inv
    qm_end = (1.0 - phi) * s2inv * level
    qm_mid = (1.0 - phi) ** 2 * s2inv * level

    Ld = np.empty((n, T))
    Lo = np.empty((n, T))  # Lo[:, t] couples t and t-1
    y = np.empty((n, T))
    # forward: Cholesky factor and L^{-1} b
    d = a + diag_end
    Ld[:, 0] = np.sqrt(d)
    y[:, 0] = (a * U[:, 0] + qm_end) / Ld[:, 0]
    for t in range(1, T):
        Lo[:, t] = off / Ld[:, t - 1]
        if t == T - 1:
            d = a + diag_end
            qm = qm_end
        else:
            d = a + diag_mid
            qm = qm_mid
        Ld[:, t] = np.sqrt(d - Lo[:, t] ** 2)
        y[:, t] = (a * U[:, t] + qm - Lo[:, t] * y[:, t - 1]) / Ld[:, t]
    y += Z
    # backward: L^{-T}
    out = np.empty((n, T))
    out[:, T - 1] = y[:, T - 1] / Ld[:, T - 1]
    for t in range(T - 2, -1, -1):
        out[:, t] = (y[:, t] - Lo[:, t + 1] * out[:, t + 1]) / Ld[:, t]
    return out

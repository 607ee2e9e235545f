"""Dense reference implementations used as test oracles (O(K^3), no shortcuts)."""

import numpy as np
from scipy import stats


def dense_givens(K, i, j, w):
    G = np.eye(K)
    c, s = np.cos(w), np.sin(w)
    G[i, i] = G[j, j] = c
    G[i, j] = s
    G[j, i] = -s
    return G


def dense_givens_deriv(K, i, j, w):
    D = np.zeros((K, K))
    c, s = np.cos(w), np.sin(w)
    D[i, i] = D[j, j] = -s
    D[i, j] = c
    D[j, i] = -c
    return D


def pairs(K):
    return [(i, j) for i in range(K) for j in range(i + 1, K)]


def dense_P(K, omega):
    P = np.eye(K)
    for (i, j), w in zip(pairs(K), omega):
        P = P @ dense_givens(K, i, j, w)
    return P


def dense_sigma(h, omega):
    P = dense_P(len(h), omega)
    return P @ np.diag(np.exp(h)) @ P.T


def dense_logpdf(h, omega, r):
    S = dense_sigma(h, omega)
    return stats.multivariate_normal(np.zeros(len(h)), S).logpdf(r)


def cholesky_logpdf(S, r):
    L = np.linalg.cholesky(S)
    z = np.linalg.solve(L, r)
    return -0.5 * (len(r) * np.log(2 * np.pi) + z @ z) - np.sum(np.log(np.diag(L)))


def dense_angle_grad(h, omega, r):
    """d/d omega_p of log N(r | 0, P Lam P^T) via explicit product derivatives."""
    K = len(h)
    prs = pairs(K)
    Gs = [dense_givens(K, i, j, w) for (i, j), w in zip(prs, omega)]
    P = dense_P(K, omega)
    lam_inv = np.diag(np.exp(-h))
    out = np.empty(len(prs))
    for p, ((i, j), w) in enumerate(zip(prs, omega)):
        dP = np.eye(K)
        for q, G in enumerate(Gs):
            dP = dP @ (dense_givens_deriv(K, i, j, w) if q == p else G)
        # log density quadratic term is -0.5 r^T P Lam^-1 P^T r
        out[p] = -(r @ dP @ lam_inv @ P.T @ r)
    return out


def ar1_dense(phi, sigma, T):
    Q = np.zeros((T, T))
    for t in range(T):
        Q[t, t] = (1 + phi**2) / sigma**2
    Q[0, 0] = Q[-1, -1] = 1 / sigma**2
    if T == 1:
        Q[0, 0] = (1 - phi**2) / sigma**2
    for t in range(T - 1):
        Q[t, t + 1] = Q[t + 1, t] = -phi / sigma**2
    return Q


def random_instance(rng, K):
    h = rng.normal(0, 1, K)
    omega = rng.uniform(-1.4, 1.4, K * (K - 1) // 2)
    r = rng.normal(0, 1, K) * np.exp(0.5 * h.max())
    return h, omega, r


def mc_se(x):
    """Standard error of a chain mean using the package's ESS."""
    from givens_msv.diagnostics import ess

    x = np.asarray(x, dtype=float)
    return x.std(ddof=1) / np.sqrt(float(ess(x)))


def fake_draws(K, x_last, phi, level, sigma, B=None, sigma2=0.0, zero_angles=False):
    """PosteriorDraws holding only what forecasting reads."""
    from givens_msv.latent_prior import tilde_from_phi
    from givens_msv.model import PosteriorDraws

    x_last = np.atleast_2d(np.asarray(x_last, dtype=float))
    S, n = x_last.shape
    B = np.eye(K) if B is None else np.asarray(B, dtype=float)
    N = B.shape[0]

    def rows(v):
        return np.broadcast_to(np.asarray(v, dtype=float), (S, n)).copy()

    return PosteriorDraws(
        K=K, N=N, T=1, mode="factor", zero_angles=zero_angles,
        phi_tilde=rows(tilde_from_phi(np.asarray(phi, dtype=float))), level=rows(level), sigma=rows(sigma),
        hyper=np.zeros((S, 4)), B=np.broadcast_to(B, (S, N, K)).copy(), sigma2=np.full(S, float(sigma2)),
        x_last=x_last, f_last=np.zeros((S, K)), loglik=np.zeros(S), sigma_last=np.zeros((S, K, K)),
        sigma_sum=np.zeros((1, K, K)), corr_sum=np.zeros((1, K, K)), f_mean=np.zeros((1, K)),
    )

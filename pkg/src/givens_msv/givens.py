"""Spectral covariance parametrisation through Givens rotations.

A covariance matrix is stored as log-eigenvalues ``h`` and rotation angles
``omega`` (one per coordinate pair ``i < j``, lexicographic order), with

    Sigma = P diag(exp(h)) P^T,   P = G_12 G_13 ... G_1K G_23 ... G_{K-1,K}.

``G_ij(w)^T`` acting on a vector changes only coordinates ``i`` and ``j``:
``v_i <- cos(w) v_i - sin(w) v_j`` and ``v_j <- sin(w) v_i + cos(w) v_j``.
Density and gradient evaluation never forms ``Sigma`` and costs O(K^2).
"""

from dataclasses import dataclass
import math

import numpy as np

from . import kernels

__all__ = [
    "PairIndex",
    "SpectralCov",
    "givens_apply_transpose",
    "grad_angles",
    "grad_log_eigenvalues",
    "log_density",
    "log_density_and_grads",
    "n_angles",
    "pair_from_flat",
    "reconstruct",
    "whiten",
]


def n_angles(K):
    return K * (K - 1) // 2


@dataclass(frozen=True)
class PairIndex:
    """A coordinate pair ``(i, j)``, zero-based with ``i < j``, and its flat position."""

    i: int
    j: int
    K: int

    def __post_init__(self):
        if not 0 <= self.i < self.j < self.K:
            raise ValueError(f"invalid pair ({self.i}, {self.j}) for K={self.K}")

    @property
    def flat(self):
        i, j, K = self.i, self.j, self.K
        return i * K - i * (i + 1) // 2 + (j - i - 1)


def pair_from_flat(flat, K):
    """Inverse of :attr:`PairIndex.flat`."""
    if not 0 <= flat < n_angles(K):
        raise ValueError(f"flat index {flat} out of range for K={K}")
    i = 0
    row = K - 1
    while flat >= row:
        flat -= row
        i += 1
        row -= 1
    return PairIndex(i, i + 1 + flat, K)


@dataclass(frozen=True)
class SpectralCov:
    """One covariance matrix in spectral (log-eigenvalue, angle) form."""

    log_eigenvalues: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.log_eigenvalues, dtype=float))
        w = np.atleast_1d(np.asarray(self.angles, dtype=float)).reshape(-1)
        if h.ndim != 1:
            raise ValueError("log_eigenvalues must be a vector")
        if w.size != n_angles(h.size):
            raise ValueError(f"expected {n_angles(h.size)} angles for K={h.size}, got {w.size}")
        if np.any(np.abs(w) >= np.pi / 2):
            raise ValueError("angles must lie strictly inside (-pi/2, pi/2)")
        object.__setattr__(self, "log_eigenvalues", h)
        object.__setattr__(self, "angles", w)

    @property
    def dim(self):
        return self.log_eigenvalues.size

    @classmethod
    def identity(cls, K):
        return cls(np.zeros(K), np.zeros(n_angles(K)))


def givens_apply_transpose(v, pair, angle):
    """Return ``G_ij(angle)^T v``; only coordinates ``i`` and ``j`` change."""
    out = np.array(v, dtype=float, copy=True)
    c, s = math.cos(angle), math.sin(angle)
    vi, vj = out[pair.i], out[pair.j]
    out[pair.i] = c * vi - s * vj
    out[pair.j] = s * vi + c * vj
    return out


def _batch(cov, r):
    return cov.log_eigenvalues[None, :], cov.angles[None, :], np.asarray(r, dtype=float).reshape(1, -1)


def whiten(cov, r):
    """``Lambda^{-1/2} P^T r``."""
    h, w, R = _batch(cov, r)
    return kernels.whiten(h, w, R)[0]


def log_density_and_grads(cov, r):
    """Log N(r | 0, Sigma) with its gradients in ``h`` and in the raw angles."""
    h, w, R = _batch(cov, r)
    ld, gh, gw = kernels.logdens_grad(h, w, R)
    return float(ld[0]), gh[0], gw[0]


def log_density(cov, r):
    return log_density_and_grads(cov, r)[0]


def grad_log_eigenvalues(cov, r):
    v = whiten(cov, r)
    return -0.5 + 0.5 * v * v


def grad_angles(cov, r):
    return log_density_and_grads(cov, r)[2]


def reconstruct(cov):
    """Dense ``Sigma``; for reporting and tests, never for sampler inner loops."""
    return kernels.reconstruct(cov.log_eigenvalues[None, :], cov.angles[None, :])[0]

"""Gaussian AR(1) prior over the latent log-eigenvalue and angle paths.

The latent state ``X`` is a ``(n_paths, T)`` array with ``n_paths = K(K+1)/2``.
Rows ``0..K-1`` are log-eigenvalue paths ``h_i``; the remaining rows are the
transformed angle paths ``delta_ij`` in lexicographic pair order, where
``delta = log(pi/2 + omega) - log(pi/2 - omega)``.

Each path follows ``x_{t+1} = x0 + phi (x_t - x0) + sigma eta_t`` with the
stationary start ``x_1 ~ N(x0, sigma^2 / (1 - phi^2))``, so its precision
matrix is tridiagonal and every solve or draw here is linear in ``T``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .givens import n_angles

__all__ = [
    "DELTA_CLAMP",
    "HyperParams",
    "LatentPaths",
    "PathParams",
    "TridiagonalGaussian",
    "angle_from_delta",
    "ar1_loglik",
    "dangle_ddelta",
    "delta_from_angle",
    "n_paths",
    "phi_from_tilde",
    "prior_log_density",
    "sample_prior",
    "solve_and_sample",
    "tilde_from_phi",
]

DELTA_CLAMP = 700.0
_LOG_2PI = np.log(2.0 * np.pi)


def n_paths(K):
    return K * (K + 1) // 2


def angle_from_delta(delta):
    """``omega = (pi/2) (e^d - 1) / (e^d + 1) = (pi/2) tanh(d / 2)``."""
    d = np.clip(delta, -DELTA_CLAMP, DELTA_CLAMP)
    return 0.5 * np.pi * np.tanh(0.5 * d)


def delta_from_angle(omega):
    omega = np.asarray(omega, dtype=float)
    return np.log(0.5 * np.pi + omega) - np.log(0.5 * np.pi - omega)


def dangle_ddelta(delta):
    """Derivative of :func:`angle_from_delta`: ``pi e^d / (e^d + 1)^2``."""
    d = np.clip(delta, -DELTA_CLAMP, DELTA_CLAMP)
    sech = 1.0 / np.cosh(0.5 * d)
    return 0.25 * np.pi * sech * sech


def phi_from_tilde(phi_tilde):
    """``phi = (e^x - 1) / (e^x + 1)``, written as ``tanh(x / 2)`` for stability."""
    return np.tanh(0.5 * np.asarray(phi_tilde, dtype=float))


def tilde_from_phi(phi):
    phi = np.asarray(phi, dtype=float)
    return np.log1p(phi) - np.log1p(-phi)


@dataclass
class LatentPaths:
    """Latent state ``X`` for a ``K``-dimensional covariance over ``T`` periods."""

    K: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != n_paths(self.K):
            raise ValueError(f"values must have shape ({n_paths(self.K)}, T)")

    @property
    def T(self):
        return self.values.shape[1]

    @property
    def h(self):
        return self.values[: self.K]

    @property
    def delta(self):
        return self.values[self.K :]

    def slice_arrays(self, t=None):
        """Per-time ``(H, Omega)``: ``H`` is ``(T, K)`` and ``Omega`` is ``(T, m)``."""
        vals = self.values if t is None else self.values[:, [t]]
        H = np.ascontiguousarray(vals[: self.K].T)
        W = np.ascontiguousarray(angle_from_delta(vals[self.K :]).T)
        return H, W

    @classmethod
    def from_slices(cls, H, Omega):
        H = np.atleast_2d(H)
        K = H.shape[1]
        Omega = np.asarray(Omega, dtype=float).reshape(H.shape[0], n_angles(K))
        return cls(K, np.vstack([H.T, delta_from_angle(Omega).T]))


@dataclass
class PathParams:
    """Per-path AR(1) parameters: transformed persistence, level and innovation sd."""

    phi_tilde: np.ndarray
    level: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.phi_tilde = np.atleast_1d(np.asarray(self.phi_tilde, dtype=float)).copy()
        self.level = np.atleast_1d(np.asarray(self.level, dtype=float)).copy()
        self.sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float)).copy()
        n = self.phi_tilde.size
        if self.level.size != n or self.sigma.size != n:
            raise ValueError("phi_tilde, level and sigma must have equal length")
        if np.any(self.sigma <= 0):
            raise ValueError("innovation sd must be positive")

    @property
    def phi(self):
        return phi_from_tilde(self.phi_tilde)

    @property
    def n(self):
        return self.phi_tilde.size

    @classmethod
    def from_phi(cls, phi, level, sigma):
        return cls(tilde_from_phi(phi), level, sigma)

    def subset(self, rows):
        return PathParams(self.phi_tilde[rows], self.level[rows], self.sigma[rows])

    def copy(self):
        return PathParams(self.phi_tilde, self.level, self.sigma)


@dataclass
class HyperParams:
    """Hierarchical prior on transformed persistences and fixed hyperprior constants.

    ``mu_h, lam_h`` (eigenvalue paths) and ``mu_d, lam_d`` (angle paths) are the
    exchangeable ``N(mu, 1/lam)`` prior on ``phi_tilde``; they carry a
    Normal-Gamma hyperprior with constants ``mu0, k0, alpha0, beta0``. In
    ``independent`` mode each ``phi_tilde`` has a fixed ``N(0, indep_var)`` prior.
    """

    mu_h: float = 3.0
    lam_h: float = 4.0
    mu_d: float = 3.0
    lam_d: float = 4.0
    mu0: float = 3.0
    k0: float = 0.01
    alpha0: float = 2.0
    beta0: float = 0.5
    sigma_shape: float = 2.5
    sigma_rate: float = 0.025
    indep_var: float = 1000.0
    prior_mode: str = "exchangeable"

    def __post_init__(self):
        if self.prior_mode not in ("exchangeable", "independent"):
            raise ValueError(f"unknown prior_mode {self.prior_mode!r}")
        for name in ("lam_h", "lam_d", "k0", "alpha0", "beta0", "sigma_shape", "sigma_rate", "indep_var"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def phi_prior(self, K):
        """Prior mean and precision of ``phi_tilde`` for each of the ``n_paths(K)`` rows."""
        n = n_paths(K)
        if self.prior_mode == "independent":
            return np.zeros(n), np.full(n, 1.0 / self.indep_var)
        mean = np.r_[np.full(K, self.mu_h), np.full(n - K, self.mu_d)]
        prec = np.r_[np.full(K, self.lam_h), np.full(n - K, self.lam_d)]
        return mean, prec

    def copy(self, **changes):
        return replace(self, **changes)


@dataclass
class TridiagonalGaussian:
    """Mean and banded precision of one path's prior ``N(x0 * 1, Q^{-1})``."""

    mean: np.ndarray
    diag: np.ndarray
    off: np.ndarray = field(default_factory=lambda: np.empty(0))

    @classmethod
    def from_ar1(cls, phi, level, sigma, T):
        s2inv = 1.0 / sigma**2
        if T == 1:
            return cls(np.full(1, level), np.array([(1.0 - phi**2) * s2inv]))
        diag = np.full(T, (1.0 + phi**2) * s2inv)
        diag[0] = diag[-1] = s2inv
        return cls(np.full(T, float(level)), diag, np.full(T - 1, -phi * s2inv))

    def dense_precision(self):
        Q = np.diag(self.diag)
        if self.off.size:
            Q += np.diag(self.off, 1) + np.diag(self.off, -1)
        return Q


def ar1_loglik(x, phi, level, sigma):
    """Exact AR(1) log-density of each row of ``x`` with stationary start.

    Parameter arguments broadcast against the rows of ``x``.
    """
    x = np.atleast_2d(x)
    T = x.shape[1]
    phi = np.asarray(phi, dtype=float)
    level = np.asarray(level, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    dev = x - level[..., None] if level.ndim else x - level
    ph = phi[..., None] if phi.ndim else phi
    quad = (1.0 - phi**2) * dev[:, 0] ** 2
    if T > 1:
        e = dev[:, 1:] - ph * dev[:, :-1]
        quad = quad + np.sum(e * e, axis=1)
    return (
        -0.5 * T * _LOG_2PI
        - T * np.log(sigma)
        + 0.5 * np.log1p(-phi**2)
        - 0.5 * quad / sigma**2
    )


def prior_log_density(paths, params):
    """Sum over paths of the AR(1) joint log-density."""
    values = paths.values if isinstance(paths, LatentPaths) else np.atleast_2d(paths)
    return float(np.sum(ar1_loglik(values, params.phi, params.level, params.sigma)))


def solve_and_sample(params, zeta, U, rng=None, Z=None):
    """One draw from ``N((I + zeta/2 Q)^{-1}(U + zeta/2 Q M), zeta/2 (I + zeta/2 Q)^{-1})``.

    Computed per path as ``L^{-T}(L^{-1}((2/zeta) U + Q M) + Z)`` with
    ``L L^T = (2/zeta) I + Q`` factored in banded form. Pass ``Z`` to supply the
    standard normal draws explicitly.
    """
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if Z is None:
        Z = rng.standard_normal(U.shape)
    return kernels.tridiag_sample(params.phi, params.sigma, params.level, zeta, U, Z)


def sample_prior(params, T, rng):
    """Forward-simulate each path from its stationary AR(1) law."""
    phi = params.phi
    out = np.empty((params.n, T))
    dev = params.sigma / np.sqrt(1.0 - phi**2) * rng.standard_normal(params.n)
    out[:, 0] = dev
    for t in range(1, T):
        dev = phi * dev + params.sigma * rng.standard_normal(params.n)
        out[:, t] = dev
    return out + params.level[:, None]

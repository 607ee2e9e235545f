"""Covariance forecasts, particle-filter predictive likelihoods and portfolio utilities."""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .givens import n_angles
from .latent_prior import angle_from_delta, phi_from_tilde

__all__ = [
    "FixedParams",
    "ParticleCloud",
    "PredictiveDraws",
    "WeightCollapseError",
    "discrepancies",
    "effective_sample_size",
    "log_bayes_factor",
    "min_variance_weights",
    "predict_sigma",
    "predictive_loglik",
    "systematic_resample",
]


class WeightCollapseError(RuntimeError):
    def __init__(self, step):
        super().__init__(f"all particle weights vanished at forecast step {step}")
        self.step = step


def _slices(K, values, zero_angles=False):
    """``(H, Omega)`` from latent vectors stacked as rows, ``values`` shape ``(S, n_paths)``."""
    H = np.ascontiguousarray(values[:, :K])
    if zero_angles or K == 1:
        Om = np.zeros((values.shape[0], n_angles(K)))
    else:
        Om = np.ascontiguousarray(angle_from_delta(values[:, K:]))
    return H, Om


@dataclass
class PredictiveDraws:
    """Draws of the latent state and factor covariance ``horizon`` steps ahead."""

    x: np.ndarray  # (S, n_paths)
    sigma: np.ndarray  # (S, K, K) factor covariance
    asset_sigma: np.ndarray  # (S, N, N) return covariance B Sigma B^T + sigma2 I
    horizon: int

    @property
    def mean(self):
        return self.sigma.mean(axis=0)

    @property
    def asset_mean(self):
        return self.asset_sigma.mean(axis=0)


def predict_sigma(draws, horizon=1, rng=None):
    """Push each retained ``x_T`` forward through the AR(1) transitions.

    One simulated path per posterior draw, using that draw's own parameters.
    """
    if draws.n_draws == 0:
        raise ValueError("no posterior draws")
    if horizon not in (1, 2):
        raise ValueError("horizon must be 1 or 2")
    rng = np.random.default_rng() if rng is None else rng
    phi = draws.phi
    x = draws.x_last.copy()
    for _ in range(horizon):
        x = draws.level + phi * (x - draws.level) + draws.sigma * rng.standard_normal(x.shape)
    if draws.zero_angles:
        x[:, draws.K :] = 0.0
    H, Om = _slices(draws.K, x, draws.zero_angles)
    Sig = kernels.reconstruct(H, Om)
    B = draws.B
    asset = np.einsum("snk,skl,sml->snm", B, Sig, B) + draws.sigma2[:, None, None] * np.eye(draws.N)
    return PredictiveDraws(x=x, sigma=Sig, asset_sigma=asset, horizon=horizon)


@dataclass
class FixedParams:
    """Static parameters held fixed while filtering (posterior means)."""

    K: int
    phi: np.ndarray
    level: np.ndarray
    sigma: np.ndarray
    B: np.ndarray
    sigma2: float
    zero_angles: bool = False

    @classmethod
    def from_draws(cls, draws):
        sp = draws.static_params()
        return cls(
            K=draws.K,
            phi=phi_from_tilde(sp["phi_tilde"]),
            level=sp["level"],
            sigma=sp["sigma"],
            B=sp["B"],
            sigma2=sp["sigma2"],
            zero_angles=draws.zero_angles,
        )

    def transition_mean(self, x):
        return self.level + self.phi * (x - self.level)

    def propagate(self, x, rng):
        return self.transition_mean(x) + self.sigma * rng.standard_normal(x.shape)

    def obs_logpdf(self, x, r, observed=None):
        """``log N(r_o | 0, B_o Sigma(x) B_o^T + sigma2 I)`` for each particle row of ``x``."""
        r = np.asarray(r, dtype=float)
        obs = np.ones(r.size, bool) if observed is None else np.asarray(observed, bool)
        if not obs.any():
            return np.zeros(x.shape[0])
        H, Om = _slices(self.K, x, self.zero_angles)
        B = self.B[obs]
        ro = r[obs]
        is_identity = B.shape[0] == self.K and np.array_equal(B, np.eye(self.K))
        if is_identity:
            # Sigma + sigma2 I shares eigenvectors with Sigma: stay O(K^2)
            Hs = np.log(np.exp(H) + self.sigma2) if self.sigma2 > 0 else H
            ld, _, _ = kernels.logdens_grad(Hs, Om, np.broadcast_to(ro, H.shape))
            return ld
        Sig = kernels.reconstruct(H, Om)
        C = np.einsum("nk,skl,ml->snm", B, Sig, B) + self.sigma2 * np.eye(B.shape[0])
        L = np.linalg.cholesky(C)
        z = np.linalg.solve(L, np.broadcast_to(ro, (x.shape[0], ro.size))[..., None])[..., 0]
        logdet = 2.0 * np.sum(np.log(np.einsum("sii->si", L)), axis=1)
        return -0.5 * (ro.size * np.log(2.0 * np.pi) + logdet + np.sum(z * z, axis=1))


def effective_sample_size(weights):
    w = np.asarray(weights, dtype=float)
    return 1.0 / np.sum(w * w)


def systematic_resample(weights, rng):
    n = weights.size
    positions = (rng.uniform() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions)


@dataclass
class ParticleCloud:
    """Latent states with normalised weights."""

    particles: np.ndarray  # (n, n_paths)
    weights: np.ndarray

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        if self.weights is None:
            self.weights = np.full(self.particles.shape[0], 1.0 / self.particles.shape[0])
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.size != self.particles.shape[0]:
            raise ValueError("one weight per particle")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")

    @property
    def n_particles(self):
        return self.particles.shape[0]

    @property
    def ess(self):
        return effective_sample_size(self.weights)

    @classmethod
    def from_draws(cls, draws, n_particles, rng):
        """Resample ``x_T`` uniformly from the retained posterior draws."""
        idx = rng.integers(0, draws.n_draws, size=n_particles)
        return cls(draws.x_last[idx], None)


def _normalise(logw):
    lse = logsumexp(logw)
    w = np.exp(logw - lse)
    w /= w.sum()
    return w


def predictive_loglik(R_future, params, cloud, rng, variant="auxiliary", resample_threshold=0.5, observed=None):
    """One-step-ahead log predictive likelihoods by particle filtering.

    ``R_future`` is ``(M, N)``. Returns ``(per_step, cumulative)`` where
    ``per_step[t]`` is ``log p(r_{T+t+1} | r_{1:T+t}, params)``. The cloud is
    updated in place. ``variant`` is ``"auxiliary"`` (first-stage weights at
    the transition mean) or ``"bootstrap"``.
    """
    if variant not in ("auxiliary", "bootstrap"):
        raise ValueError(f"unknown variant {variant!r}")
    R_future = np.atleast_2d(np.asarray(R_future, dtype=float)) if np.size(R_future) else np.empty((0, 0))
    M = R_future.shape[0]
    out = np.empty(M)
    n = cloud.n_particles
    for t in range(M):
        r = R_future[t]
        obs = None if observed is None else observed[t]
        if observed is None:
            obs = np.isfinite(r)
        r = np.where(obs, r, 0.0)
        logw_prev = np.log(cloud.weights)
        if variant == "auxiliary":
            mu = params.transition_mean(cloud.particles)
            log_g = params.obs_logpdf(mu, r, obs)
            first = logw_prev + log_g
            if not np.any(np.isfinite(first)):
                raise WeightCollapseError(t)
            log_p1 = logsumexp(first)
            lam = _normalise(first)
            if effective_sample_size(lam) < resample_threshold * n:
                idx = systematic_resample(lam, rng)
                log_in = np.full(n, -np.log(n))
            else:
                idx = np.arange(n)
                log_in = np.log(lam)
            x = params.propagate(cloud.particles[idx], rng)
            log_second = params.obs_logpdf(x, r, obs) - log_g[idx]
            total = log_in + log_second
            if not np.any(np.isfinite(total)):
                raise WeightCollapseError(t)
            out[t] = log_p1 + logsumexp(total)
            w = _normalise(total)
        else:
            x = params.propagate(cloud.particles, rng)
            total = logw_prev + params.obs_logpdf(x, r, obs)
            if not np.any(np.isfinite(total)):
                raise WeightCollapseError(t)
            out[t] = logsumexp(total)
            w = _normalise(total)
            if effective_sample_size(w) < resample_threshold * n:
                idx = systematic_resample(w, rng)
                x = x[idx]
                w = np.full(n, 1.0 / n)
        cloud.particles = x
        cloud.weights = w
    return out, float(out.sum())


def log_bayes_factor(cum_a, cum_b):
    """Cumulative log predictive Bayes factor of model ``a`` against ``b``."""
    return cum_a - cum_b


def discrepancies(predicted, proxy):
    """Mean absolute deviation and RMSE over all ``N^2`` cells."""
    A = np.asarray(predicted, dtype=float)
    Bm = np.asarray(proxy, dtype=float)
    if A.shape != Bm.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"need two square matrices of equal size, got {A.shape} and {Bm.shape}")
    d = Bm - A
    n2 = d.size
    return float(np.abs(d).sum() / n2), float(np.sqrt((d * d).sum() / n2))


def min_variance_weights(cov):
    """``Sigma^-1 1 / (1^T Sigma^-1 1)``; short positions allowed."""
    S = np.asarray(cov, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(S, S.T, rtol=1e-10, atol=1e-12 * np.abs(S).max()):
        raise ValueError("covariance must be symmetric")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise ValueError("covariance is not positive definite") from None
    ones = np.ones(S.shape[0])
    x = np.linalg.solve(L.T, np.linalg.solve(L, ones))
    w = x / x.sum()
    return w / w.sum()

"""MCMC transition kernels.

The latent state ``X`` is moved jointly by the auxiliary Langevin sampler: an
auxiliary ``U ~ N(X + (zeta/2) grad, (zeta/2) I)`` followed by a proposal drawn
from ``N(Y | U, (zeta/2) I) p(Y)`` normalised. The Gaussian prior cancels from
the acceptance ratio, so only likelihood values and gradients are evaluated.
The latent factors use the same construction with prior ``N(0, Sigma_t)``,
whose proposal shares eigenvectors with ``Sigma_t`` and so needs only Givens
rotations. Everything else is conjugate Gibbs or random-walk Metropolis.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import kernels
from .givens import SpectralCov, n_angles
from .latent_prior import angle_from_delta, dangle_ddelta, phi_from_tilde, solve_and_sample

__all__ = [
    "AuxLangevinState",
    "ConstantLikelihood",
    "FactorLikelihood",
    "LikelihoodInterface",
    "adapt_step_size",
    "aux_langevin_step",
    "factor_step_gibbs",
    "factor_step_metropolis",
    "factor_sweep_gibbs",
    "factor_sweep_metropolis",
    "gibbs_hyper",
    "gibbs_loadings",
    "gibbs_path_level_and_variance",
    "gibbs_sigma2",
    "mh_persistence",
]

LANGEVIN_TARGET = 0.55
RANDOM_WALK_TARGET = 0.25


@dataclass
class AuxLangevinState:
    """Step size(s) plus Robbins-Monro adaptation bookkeeping.

    ``step_size`` may be a scalar (one ``zeta`` for all of ``X``) or an array
    (independent ``zeta_t`` per factor slice, or per-path proposal scales).
    Each adaptation call moves ``log step`` by ``n^-exponent * (accept - target)``.
    """

    step_size: float | np.ndarray = 0.1
    use_gradient: bool = True
    target_acceptance: float | None = None
    exponent: float = 0.6
    window: int = 2000
    n_adapt: int = 0
    frozen: bool = False
    n_proposed: int = 0
    n_accepted: float = 0.0
    burn_proposed: int = 0
    burn_accepted: float = 0.0
    recent: deque = field(default_factory=deque, repr=False)

    def __post_init__(self):
        if self.target_acceptance is None:
            self.target_acceptance = LANGEVIN_TARGET if self.use_gradient else RANDOM_WALK_TARGET
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target_acceptance must lie in (0, 1)")
        step = np.asarray(self.step_size, dtype=float)
        if np.any(step <= 0):
            raise ValueError("step size must be positive")
        self.step_size = step.copy() if step.ndim else float(step)
        self.recent = deque(maxlen=self.window)

    def record(self, accepted):
        """Count an accept/reject outcome (mean over elements when vectorised)."""
        rate = float(np.mean(accepted))
        self.recent.append(rate)
        if self.frozen:
            self.n_proposed += 1
            self.n_accepted += rate
        else:
            self.burn_proposed += 1
            self.burn_accepted += rate

    def freeze(self):
        self.frozen = True

    @property
    def acceptance_rate(self):
        """Post-burn-in acceptance rate (burn-in rate if still adapting)."""
        if self.n_proposed:
            return self.n_accepted / self.n_proposed
        if self.burn_proposed:
            return self.burn_accepted / self.burn_proposed
        return float("nan")

    @property
    def recent_acceptance(self):
        return float(np.mean(self.recent)) if self.recent else float("nan")


def adapt_step_size(state, accepted):
    """Record ``accepted`` and, unless frozen, apply one Robbins-Monro update."""
    state.record(accepted)
    if state.frozen:
        return state
    state.n_adapt += 1
    gain = state.n_adapt ** (-state.exponent)
    acc = np.asarray(accepted, dtype=float)
    step = np.exp(np.log(state.step_size) + gain * (acc - state.target_acceptance))
    state.step_size = step if np.ndim(step) else float(step)
    return state


class LikelihoodInterface(Protocol):
    """Anything returning ``(log p(F | X), grad_X log p(F | X))`` for an ``X`` array."""

    def __call__(self, values: np.ndarray) -> tuple[float, np.ndarray]: ...


class ConstantLikelihood:
    """Flat likelihood; the sampler must then leave the prior invariant."""

    def __init__(self, value=0.0):
        self.value = float(value)

    def __call__(self, values):
        return self.value, np.zeros_like(values)


class FactorLikelihood:
    """``sum_t log N(f_t | 0, Sigma_t(x_t))`` over a ``(n_paths, T)`` latent array.

    ``F`` is ``(T, K)``. With ``zero_angles`` the angle rows are ignored,
    every ``omega`` is 0, and their gradient rows are zero (independent
    factor model).
    """

    def __init__(self, F, K, zero_angles=False):
        self.F = np.ascontiguousarray(F, dtype=float)
        self.K = K
        self.zero_angles = zero_angles
        self.n_calls = 0

    def per_slice(self, values):
        K = self.K
        H = np.ascontiguousarray(values[:K].T)
        if self.zero_angles:
            Om = np.zeros((H.shape[0], n_angles(K)))
        else:
            Om = np.ascontiguousarray(angle_from_delta(values[K:]).T)
        return kernels.logdens_grad(H, Om, self.F)

    def __call__(self, values):
        self.n_calls += 1
        ld, gh, gw = self.per_slice(values)
        grad = np.empty_like(values)
        grad[: self.K] = gh.T
        if self.zero_angles:
            grad[self.K :] = 0.0
        else:
            grad[self.K :] = gw.T * dangle_ddelta(values[self.K :])
        return float(ld.sum()), grad


def aux_langevin_step(X, lik, prior, state, rng, current=None):
    """One auxiliary Langevin (or auxiliary random-walk) update of all of ``X``.

    ``prior`` is the :class:`PathParams` of the rows in ``X``. ``current``
    optionally carries ``(loglik, grad)`` at ``X`` from a previous call with the
    same likelihood. Returns ``(X_next, accepted, (loglik, grad) at X_next)``.
    """
    zeta = float(state.step_size)
    if current is None:
        current = lik(X)
    ll_x, grad_x = current
    d_x = grad_x if state.use_gradient else np.zeros_like(X)

    U = X + 0.5 * zeta * d_x + np.sqrt(0.5 * zeta) * rng.standard_normal(X.shape)
    Y = solve_and_sample(prior, zeta, U, rng)

    ll_y, grad_y = lik(Y)
    d_y = grad_y if state.use_gradient else np.zeros_like(Y)
    with np.errstate(invalid="ignore", over="ignore"):
        log_r = (
            ll_y
            - ll_x
            - np.sum((U - X) * d_x)
            + np.sum((U - Y) * d_y)
            - 0.25 * zeta * (np.sum(d_y * d_y) - np.sum(d_x * d_x))
        )
    accepted = bool(np.isfinite(log_r) and np.log(rng.uniform()) < log_r)
    if accepted:
        return Y, True, (ll_y, grad_y)
    return X, False, (ll_x, grad_x)


def _obs_terms(F, R, mask, B, sigma2):
    resid = np.where(mask, R - F @ B.T, 0.0)
    ll = -0.5 * np.sum(resid * resid, axis=1) / sigma2
    grad = (resid @ B) / sigma2
    return ll, grad


def factor_sweep_metropolis(F, R, mask, B, sigma2, H, Om, zeta, rng):
    """Auxiliary Langevin update of every ``f_t`` at once, O(T(NK + K^2)).

    ``zeta`` is a length-``T`` array of per-slice step sizes. Returns the new
    ``(T, K)`` factors and a boolean acceptance vector.
    """
    T, K = F.shape
    zeta = np.broadcast_to(np.asarray(zeta, dtype=float), (T,))
    z = zeta[:, None]
    ll_x, d_x = _obs_terms(F, R, mask, B, sigma2)
    U = F + 0.5 * z * d_x + np.sqrt(0.5 * z) * rng.standard_normal((T, K))
    # proposal covariance P diag(1 / (2/zeta + e^-h)) P^T
    d = 1.0 / (2.0 / z + np.exp(-H))
    rot = kernels.rotate_transpose(Om, (2.0 / z) * U)
    Y = kernels.rotate(Om, d * rot + np.sqrt(d) * rng.standard_normal((T, K)))
    ll_y, d_y = _obs_terms(Y, R, mask, B, sigma2)
    log_r = (
        ll_y
        - ll_x
        - np.sum((U - F) * d_x, axis=1)
        + np.sum((U - Y) * d_y, axis=1)
        - 0.25 * zeta * (np.sum(d_y * d_y, axis=1) - np.sum(d_x * d_x, axis=1))
    )
    with np.errstate(invalid="ignore"):
        accepted = np.isfinite(log_r) & (np.log(rng.uniform(size=T)) < log_r)
    return np.where(accepted[:, None], Y, F), accepted


def factor_step_metropolis(f_t, r_t, B, sigma2, cov_t, zeta_t, rng, observed=None):
    """Single-slice version of :func:`factor_sweep_metropolis`."""
    r_t = np.asarray(r_t, dtype=float)
    mask = np.ones(r_t.size, bool) if observed is None else np.asarray(observed, bool)
    F, acc = factor_sweep_metropolis(
        np.asarray(f_t, dtype=float)[None, :],
        np.where(mask, r_t, 0.0)[None, :],
        mask[None, :],
        np.asarray(B, dtype=float),
        sigma2,
        cov_t.log_eigenvalues[None, :],
        cov_t.angles[None, :],
        np.array([zeta_t]),
        rng,
    )
    return F[0], bool(acc[0])


def factor_step_gibbs(r_t, B, sigma2, cov_t, rng, observed=None):
    """Exact draw from ``N(sigma^-2 M^-1 B^T r, M^-1)``, ``M = sigma^-2 B^T B + Sigma^-1``.

    Dense O(K^3); the reference for :func:`factor_step_metropolis`.
    """
    h = cov_t.log_eigenvalues
    sigma_inv = kernels.reconstruct(-h[None, :], cov_t.angles[None, :])[0]
    B = np.asarray(B, dtype=float)
    r_t = np.asarray(r_t, dtype=float)
    if observed is not None:
        obs = np.asarray(observed, bool)
        B, r_t = B[obs], r_t[obs]
    M = B.T @ B / sigma2 + sigma_inv
    L = np.linalg.cholesky(M)
    mean = np.linalg.solve(L.T, np.linalg.solve(L, B.T @ r_t / sigma2))
    return mean + np.linalg.solve(L.T, rng.standard_normal(h.size))


def factor_sweep_gibbs(R, mask, B, sigma2, H, Om, rng):
    """Exact Gibbs update of every ``f_t``, one dense solve per slice."""
    T, K = H.shape
    F = np.empty((T, K))
    for t in range(T):
        F[t] = factor_step_gibbs(R[t], B, sigma2, SpectralCov(H[t], Om[t]), rng, observed=mask[t])
    return F


def loading_pattern(N, K):
    """Boolean mask of free loadings and the fixed matrix (zeros, unit diagonal)."""
    free = np.ones((N, K), bool)
    fixed = np.zeros((N, K))
    for i in range(min(N, K)):
        free[i, i:] = False
        fixed[i, i] = 1.0
    return free, fixed


def gibbs_loadings(F, R, mask, sigma2, prior_variance, rng):
    """Row-wise conjugate draw of the free loadings under ``b_ii = 1, b_ij = 0 (i < j)``.

    ``F`` is ``(T, K)``, ``R`` and ``mask`` are ``(T, N)``. Each free entry has
    prior ``N(0, prior_variance)``; unobserved cells are excluded per row.
    """
    T, K = F.shape
    N = R.shape[1]
    free, B = loading_pattern(N, K)
    for n in range(N):
        cols = np.flatnonzero(free[n])
        if cols.size == 0:
            continue
        obs = mask[:, n]
        Fo = F[obs]
        y = R[obs, n] - Fo @ B[n]
        X = Fo[:, cols]
        prec = X.T @ X / sigma2 + np.eye(cols.size) / prior_variance
        L = np.linalg.cholesky(prec)
        mean = np.linalg.solve(L.T, np.linalg.solve(L, X.T @ y / sigma2))
        B[n, cols] = mean + np.linalg.solve(L.T, rng.standard_normal(cols.size))
    return B


def gibbs_sigma2(residuals, prior_shape, prior_rate, rng):
    """Inverse-gamma draw given observed-cell residuals."""
    residuals = np.asarray(residuals, dtype=float).ravel()
    shape = prior_shape + 0.5 * residuals.size
    rate = prior_rate + 0.5 * float(residuals @ residuals)
    return rate / rng.gamma(shape)


def _level_stats(x, phi):
    """Precision (times sigma^2) and linear term (times sigma^2) for the level."""
    T = x.shape[1]
    prec = (1.0 - phi**2) + (T - 1) * (1.0 - phi) ** 2
    lin = (1.0 - phi**2) * x[:, 0]
    if T > 1:
        lin = lin + (1.0 - phi) * np.sum(x[:, 1:] - phi[:, None] * x[:, :-1], axis=1)
    return prec, lin


def gibbs_path_level_and_variance(x, phi, sigma, prior_shape, prior_rate, rng):
    """Draw each path's level (flat prior) then its innovation variance.

    ``x`` is ``(n, T)``; ``phi`` and the current ``sigma`` have length ``n``.
    Returns ``(level, sigma2)`` arrays.
    """
    x = np.atleast_2d(x)
    n, T = x.shape
    phi = np.asarray(phi, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    prec, lin = _level_stats(x, phi)
    level = lin / prec + sigma / np.sqrt(prec) * rng.standard_normal(n)
    dev = x - level[:, None]
    quad = (1.0 - phi**2) * dev[:, 0] ** 2
    if T > 1:
        e = dev[:, 1:] - phi[:, None] * dev[:, :-1]
        quad = quad + np.sum(e * e, axis=1)
    shape = prior_shape + 0.5 * T
    sigma2 = (prior_rate + 0.5 * quad) / rng.gamma(shape, size=n)
    return level, sigma2


def _ar1_phi_loglik(x, phi, level, sigma):
    dev = x - level[:, None]
    quad = (1.0 - phi**2) * dev[:, 0] ** 2
    if x.shape[1] > 1:
        e = dev[:, 1:] - phi[:, None] * dev[:, :-1]
        quad = quad + np.sum(e * e, axis=1)
    return 0.5 * np.log1p(-phi**2) - 0.5 * quad / sigma**2


def mh_persistence(phi_tilde, x, level, sigma, prior_mean, prior_prec, proposal_sd, rng):
    """Gaussian random-walk Metropolis on each path's transformed persistence."""
    x = np.atleast_2d(x)
    phi_tilde = np.asarray(phi_tilde, dtype=float)
    prop = phi_tilde + np.asarray(proposal_sd) * rng.standard_normal(phi_tilde.shape)
    phi_c, phi_p = phi_from_tilde(phi_tilde), phi_from_tilde(prop)
    ok = np.abs(phi_p) < 1.0
    phi_p = np.where(ok, phi_p, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = (
            _ar1_phi_loglik(x, phi_p, level, sigma)
            - _ar1_phi_loglik(x, phi_c, level, sigma)
            - 0.5 * prior_prec * ((prop - prior_mean) ** 2 - (phi_tilde - prior_mean) ** 2)
        )
    log_r = np.where(ok & np.isfinite(log_r), log_r, -np.inf)
    accepted = np.log(rng.uniform(size=phi_tilde.shape)) < log_r
    return np.where(accepted, prop, phi_tilde), accepted


def gibbs_hyper(values, mu0, k0, alpha0, beta0, rng):
    """Normal-Gamma posterior draw of ``(mu, lam)`` given exchangeable ``values``."""
    values = np.atleast_1d(np.asarray(values, dtype=float))
    n = values.size
    mean = values.mean()
    ss = np.sum((values - mean) ** 2)
    k_n = k0 + n
    mu_n = (k0 * mu0 + n * mean) / k_n
    alpha_n = alpha0 + 0.5 * n
    beta_n = beta0 + 0.5 * ss + 0.5 * k0 * n * (mean - mu0) ** 2 / k_n
    lam = rng.gamma(alpha_n, 1.0 / beta_n)
    mu = mu_n + rng.standard_normal() / np.sqrt(k_n * lam)
    return float(mu), float(lam)

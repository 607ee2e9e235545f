"""Basic and full factor MSV models and the Metropolis-within-Gibbs driver.

Returns follow ``r_t = B f_t + sigma e_t`` with ``f_t ~ N(0, Sigma_t(x_t))`` and
``Sigma_t`` given by the Givens parametrisation of the latent paths ``x_t``.
The basic model is the special case ``N = K``, ``B = I`` with a small
idiosyncratic variance that absorbs missing cells.
"""

from dataclasses import asdict, dataclass, field, fields
import logging
import time

import numpy as np

from . import kernels
from .givens import n_angles
from .latent_prior import (
    HyperParams,
    PathParams,
    angle_from_delta,
    n_paths,
    sample_prior,
    tilde_from_phi,
)
from .samplers import (
    AuxLangevinState,
    FactorLikelihood,
    adapt_step_size,
    aux_langevin_step,
    factor_sweep_gibbs,
    factor_sweep_metropolis,
    gibbs_hyper,
    gibbs_loadings,
    gibbs_path_level_and_variance,
    gibbs_sigma2,
    loading_pattern,
    mh_persistence,
)

log = logging.getLogger(__name__)

__all__ = [
    "ModelConfig",
    "NumericalError",
    "PosteriorDraws",
    "ReturnsPanel",
    "log_factor_likelihood",
    "mcmc_run",
    "simulate_panel",
    "volatility_path_summary",
]


class NumericalError(RuntimeError):
    """Raised when a sampler block produces a non-finite state."""

    def __init__(self, block, iteration):
        super().__init__(f"non-finite state after block {block!r} at iteration {iteration}")
        self.block = block
        self.iteration = iteration


@dataclass
class ReturnsPanel:
    """``T x N`` returns with an observation mask; masked cells are ignored."""

    values: np.ndarray
    observed: np.ndarray = None
    names: list = None

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.observed is None:
            obs = np.isfinite(vals)
        else:
            obs = np.asarray(self.observed, dtype=bool) & np.isfinite(vals)
        if obs.shape != vals.shape:
            raise ValueError("mask shape must match values")
        self.values = np.where(obs, vals, 0.0)
        self.observed = obs
        if self.names is None:
            self.names = [f"x{n}" for n in range(vals.shape[1])]
        if len(self.names) != vals.shape[1]:
            raise ValueError("one name per column required")

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def N(self):
        return self.values.shape[1]

    @property
    def n_missing(self):
        return int((~self.observed).sum())

    def with_nan(self):
        return np.where(self.observed, self.values, np.nan)

    def head(self, T):
        return ReturnsPanel(self.values[:T], self.observed[:T], list(self.names))

    def tail(self, start):
        return ReturnsPanel(self.values[start:], self.observed[start:], list(self.names))


@dataclass
class ModelConfig:
    """Model structure, priors, MCMC lengths and adaptation settings."""

    K: int = 1
    mode: str = "factor"
    prior_mode: str = "exchangeable"
    angles: str = "free"
    burn_in: int = 10000
    n_samples: int = 10000
    thin: int = 10
    seed: int = 0
    use_gradient: bool = True
    factor_sampler: str = "metropolis"
    target_accept_langevin: float = 0.55
    target_accept_rw: float = 0.25
    target_accept_persistence: float = 0.25
    adapt_exponent: float = 0.6
    init_zeta_x: float = 0.05
    init_zeta_f: float = 0.5
    init_persistence_sd: float = 0.3
    init_phi: float = 0.95
    init_sigma: float = 0.1
    mu0: float = 3.0
    k0: float = 0.01
    alpha0: float = 2.0
    beta0: float = 0.5
    path_sigma_shape: float = 2.5
    path_sigma_rate: float = 0.025
    indep_prior_var: float = 1000.0
    loading_prior_var: float = 10.0
    sigma2_shape: float | None = None
    sigma2_mean_frac: float | None = None
    sigma2_fixed: float | None = None
    store_full_x: bool = False

    def __post_init__(self):
        choices = {
            "mode": ("basic", "factor"),
            "prior_mode": ("exchangeable", "independent"),
            "angles": ("free", "zero"),
            "factor_sampler": ("metropolis", "gibbs"),
        }
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ValueError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.burn_in < 0 or self.n_samples < 0 or self.thin < 1:
            raise ValueError("burn_in and n_samples must be >= 0 and thin >= 1")
        if self.sigma2_fixed is not None and self.sigma2_fixed < 0:
            raise ValueError("sigma2_fixed must be non-negative")

    @property
    def sigma2_prior(self):
        """``(shape, mean_frac)``: inverse-gamma shape and prior mean as a fraction of data variance."""
        if self.mode == "basic":
            return (self.sigma2_shape or 20.0, self.sigma2_mean_frac or 1e-3)
        return (self.sigma2_shape or 2.0, self.sigma2_mean_frac or 0.1)

    def hyper(self):
        return HyperParams(
            mu_h=self.mu0,
            lam_h=self.alpha0 / self.beta0,
            mu_d=self.mu0,
            lam_d=self.alpha0 / self.beta0,
            mu0=self.mu0,
            k0=self.k0,
            alpha0=self.alpha0,
            beta0=self.beta0,
            sigma_shape=self.path_sigma_shape,
            sigma_rate=self.path_sigma_rate,
            indep_var=self.indep_prior_var,
            prior_mode=self.prior_mode,
        )

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    def to_dict(self):
        return asdict(self)


def log_factor_likelihood(R, B, sigma2, F):
    """``sum`` over observed cells of ``log N(r_tn | (B f_t)_n, sigma2)``."""
    resid = np.where(R.observed, R.values - np.asarray(F) @ np.asarray(B).T, 0.0)
    n_obs = R.observed.sum()
    if n_obs == 0:
        return 0.0
    return float(-0.5 * n_obs * np.log(2.0 * np.pi * sigma2) - 0.5 * np.sum(resid**2) / sigma2)


@dataclass
class PosteriorDraws:
    """Thinned posterior draws plus running per-time covariance summaries."""

    K: int
    N: int
    T: int
    mode: str
    zero_angles: bool
    phi_tilde: np.ndarray
    level: np.ndarray
    sigma: np.ndarray
    hyper: np.ndarray  # columns mu_h, lam_h, mu_d, lam_d
    B: np.ndarray
    sigma2: np.ndarray
    x_last: np.ndarray
    f_last: np.ndarray
    loglik: np.ndarray
    sigma_last: np.ndarray  # per-draw Sigma_T, (S, K, K)
    sigma_sum: np.ndarray  # (T, K, K) running sum over draws
    corr_sum: np.ndarray
    f_mean: np.ndarray
    X: np.ndarray | None = None
    acceptance: dict = field(default_factory=dict)
    step_sizes: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return self.phi_tilde.shape[0]

    @property
    def phi(self):
        return np.tanh(0.5 * self.phi_tilde)

    def static_params(self):
        """Posterior mean of static parameters; persistences averaged on the unconstrained scale."""
        return {
            "phi_tilde": self.phi_tilde.mean(axis=0),
            "level": self.level.mean(axis=0),
            "sigma": np.sqrt((self.sigma**2).mean(axis=0)),
            "B": self.B.mean(axis=0),
            "sigma2": float(self.sigma2.mean()),
        }

    def monitored(self):
        """Named scalar chains for ESS diagnostics."""
        out = {}
        iu = np.triu_indices(self.K)
        for a, b in zip(*iu):
            out[f"Sigma_T[{a},{b}]"] = self.sigma_last[:, a, b]
        for p in range(self.phi_tilde.shape[1]):
            out[f"phi[{p}]"] = self.phi[:, p]
            out[f"sigma[{p}]"] = self.sigma[:, p]
            out[f"level[{p}]"] = self.level[:, p]
        if self.mode == "factor":
            out["sigma2"] = self.sigma2
        return out


def _ewma_log_var(F, span=20):
    """Two-sided exponentially smoothed log squared factors for initialisation."""
    T = F.shape[0]
    a = 2.0 / (span + 1.0)
    sq = F**2
    fwd = np.empty_like(sq)
    bwd = np.empty_like(sq)
    fwd[0] = sq[: min(T, span)].mean(axis=0)
    for t in range(1, T):
        fwd[t] = (1 - a) * fwd[t - 1] + a * sq[t]
    bwd[-1] = sq[-min(T, span):].mean(axis=0)
    for t in range(T - 2, -1, -1):
        bwd[t] = (1 - a) * bwd[t + 1] + a * sq[t]
    v = 0.5 * (fwd + bwd)
    floor = 1e-3 * max(float(sq.mean()), 1e-300)
    return np.log(np.maximum(v, floor))


def _init_loadings(R, K):
    """Principal-component loadings rotated to the constrained lower-triangular form."""
    X = np.where(R.observed, R.values, 0.0)
    cov = X.T @ X / np.maximum(R.observed.T.astype(float) @ R.observed, 1.0)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:K]
    L = evecs[:, order] * np.sqrt(np.maximum(evals[order], 1e-12))
    # L = (L Q^T) Q with the top block of L Q^T lower triangular
    Q, Rq = np.linalg.qr(L[:K].T)
    B = L @ Q
    diag = np.diag(B[:K]).copy()
    diag[np.abs(diag) < 1e-8] = 1e-8
    B = B / diag
    free, fixed = loading_pattern(R.N, K)
    return np.where(free, B, fixed)


def _init_factors(R, B, ridge=1e-6):
    T, K = R.T, B.shape[1]
    F = np.zeros((T, K))
    for t in range(T):
        o = R.observed[t]
        if not o.any():
            continue
        Bo = B[o]
        F[t] = np.linalg.solve(Bo.T @ Bo + ridge * np.eye(K), Bo.T @ R.values[t, o])
    return F


def _corr(S):
    d = np.sqrt(np.einsum("...ii->...i", S))
    return S / (d[..., :, None] * d[..., None, :])


class _Run:
    """Mutable chain state for one :func:`mcmc_run` call."""

    def __init__(self, R, cfg, rng, init=None):
        self.R, self.cfg, self.rng = R, cfg, rng
        K = cfg.K
        if cfg.mode == "basic" and R.N != K:
            raise ValueError(f"basic mode needs K == N, got K={K}, N={R.N}")
        if K > R.N:
            raise ValueError(f"K={K} exceeds the number of series N={R.N}")
        if cfg.mode == "factor" and R.T < K:
            raise ValueError("need at least K time points")
        col_obs = R.observed.sum(axis=0)
        if np.any(col_obs == 0):
            raise ValueError("every column needs at least one observed cell")
        self.K = K
        self.zero_angles = cfg.angles == "zero" or K == 1
        n = n_paths(K)
        self.active = np.arange(n) if not self.zero_angles else np.arange(K)
        self.hyper = cfg.hyper()

        obs_var = float(np.sum(R.values**2) / R.observed.sum())
        shape, frac = cfg.sigma2_prior
        self.s2_shape = shape
        self.s2_rate = (shape - 1.0) * frac * obs_var if shape > 1 else frac * obs_var

        if cfg.mode == "basic":
            self.B = np.eye(K)
            self.F = R.values.copy()
            if R.n_missing:
                self.F[~R.observed] = 0.0
        else:
            self.B = _init_loadings(R, K)
            self.F = _init_factors(R, self.B)
        if cfg.sigma2_fixed is not None:
            if cfg.sigma2_fixed == 0.0 and (cfg.mode != "basic" or R.n_missing):
                raise ValueError("sigma2_fixed = 0 needs basic mode and a complete panel")
            self.sigma2 = float(cfg.sigma2_fixed)
        elif cfg.mode == "basic":
            self.sigma2 = self.s2_rate / (self.s2_shape - 1.0) if self.s2_shape > 1 else frac * obs_var
        else:
            resid = np.where(R.observed, R.values - self.F @ self.B.T, 0.0)
            self.sigma2 = max(float(np.sum(resid**2) / R.observed.sum()), 0.1 * frac * obs_var)
        self.pinned = cfg.mode == "basic" and cfg.sigma2_fixed == 0.0

        T = R.T
        X = np.zeros((n, T))
        X[:K] = _ewma_log_var(self.F).T
        self.X = X
        self.params = PathParams(
            np.full(n, tilde_from_phi(cfg.init_phi)),
            X.mean(axis=1),
            np.full(n, cfg.init_sigma),
        )

        self.x_state = AuxLangevinState(
            step_size=cfg.init_zeta_x,
            use_gradient=cfg.use_gradient,
            target_acceptance=cfg.target_accept_langevin if cfg.use_gradient else cfg.target_accept_rw,
            exponent=cfg.adapt_exponent,
        )
        self.f_state = AuxLangevinState(
            step_size=np.full(T, cfg.init_zeta_f),
            target_acceptance=cfg.target_accept_langevin,
            exponent=cfg.adapt_exponent,
        )
        self.phi_state = AuxLangevinState(
            step_size=np.full(n, cfg.init_persistence_sd),
            use_gradient=False,
            target_acceptance=cfg.target_accept_persistence,
            exponent=cfg.adapt_exponent,
        )
        if init:
            self._apply_init(init)
        self.timing = {"factors": 0.0, "latent": 0.0, "hyper": 0.0, "record": 0.0}

    def _apply_init(self, init):
        unknown = set(init) - {"X", "params", "F", "B", "sigma2"}
        if unknown:
            raise ValueError(f"unknown init entries {sorted(unknown)}")
        if "X" in init:
            X = np.array(init["X"], dtype=float)
            if X.shape != self.X.shape:
                raise ValueError(f"init X must have shape {self.X.shape}")
            self.X = X
        if "params" in init:
            self.params = init["params"].copy()
        if "F" in init and not self.pinned:
            self.F = np.array(init["F"], dtype=float)
        if "B" in init and self.cfg.mode == "factor":
            self.B = np.array(init["B"], dtype=float)
        if "sigma2" in init and self.cfg.sigma2_fixed is None:
            self.sigma2 = float(init["sigma2"])

    def slices(self):
        H = np.ascontiguousarray(self.X[: self.K].T)
        if self.zero_angles:
            Om = np.zeros((H.shape[0], n_angles(self.K)))
        else:
            Om = np.ascontiguousarray(angle_from_delta(self.X[self.K :]).T)
        return H, Om

    def _check(self, block, it, *arrays):
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise NumericalError(block, it)

    def sweep(self, it, adapting):
        cfg, R, rng = self.cfg, self.R, self.rng
        t0 = time.perf_counter()
        # (a) loadings, idiosyncratic variance, factors
        if not self.pinned:
            if cfg.mode == "factor":
                self.B = gibbs_loadings(self.F, R.values, R.observed, self.sigma2, cfg.loading_prior_var, rng)
            if cfg.sigma2_fixed is None:
                resid = (R.values - self.F @ self.B.T)[R.observed]
                self.sigma2 = gibbs_sigma2(resid, self.s2_shape, self.s2_rate, rng)
            H, Om = self.slices()
            if cfg.factor_sampler == "gibbs":
                self.F = factor_sweep_gibbs(R.values, R.observed, self.B, self.sigma2, H, Om, rng)
            else:
                self.F, acc = factor_sweep_metropolis(
                    self.F, R.values, R.observed, self.B, self.sigma2, H, Om, self.f_state.step_size, rng
                )
                if adapting:
                    adapt_step_size(self.f_state, acc)
                else:
                    self.f_state.record(acc)
            self._check("factors", it, self.F, self.B, np.array([self.sigma2]))
        t1 = time.perf_counter()

        # (b) all latent paths jointly
        lik = FactorLikelihood(self.F, self.K, zero_angles=self.zero_angles)
        act = self.active
        if self.zero_angles:
            Xa = self.X[act]

            def lik_active(values):
                full = self.X.copy()
                full[act] = values
                ll, g = lik(full)
                return ll, g[act]

            new, acc, _ = aux_langevin_step(Xa, lik_active, self.params.subset(act), self.x_state, rng)
            self.X[act] = new
        else:
            self.X, acc, _ = aux_langevin_step(self.X, lik, self.params, self.x_state, rng)
        if adapting:
            adapt_step_size(self.x_state, acc)
        else:
            self.x_state.record(acc)
        self._check("latent", it, self.X)
        t2 = time.perf_counter()

        # (c) path parameters and hyperparameters
        Xa = self.X[act]
        p = self.params
        level, sigma2 = gibbs_path_level_and_variance(
            Xa, p.phi[act], p.sigma[act], self.hyper.sigma_shape, self.hyper.sigma_rate, rng
        )
        p.level[act] = level
        p.sigma[act] = np.sqrt(sigma2)
        mean, prec = self.hyper.phi_prior(self.K)
        new_tilde, acc = mh_persistence(
            p.phi_tilde[act], Xa, p.level[act], p.sigma[act], mean[act], prec[act],
            self.phi_state.step_size[act], rng,
        )
        p.phi_tilde[act] = new_tilde
        if adapting:
            full_acc = np.full(p.n, self.phi_state.target_acceptance)
            full_acc[act] = acc
            adapt_step_size(self.phi_state, full_acc)
        else:
            self.phi_state.record(acc)
        if self.hyper.prior_mode == "exchangeable":
            h = self.hyper
            h.mu_h, h.lam_h = gibbs_hyper(p.phi_tilde[: self.K], h.mu0, h.k0, h.alpha0, h.beta0, rng)
            if not self.zero_angles:
                h.mu_d, h.lam_d = gibbs_hyper(p.phi_tilde[self.K :], h.mu0, h.k0, h.alpha0, h.beta0, rng)
        self._check("hyper", it, p.phi_tilde, p.level, p.sigma)
        t3 = time.perf_counter()
        self.timing["factors"] += t1 - t0
        self.timing["latent"] += t2 - t1
        self.timing["hyper"] += t3 - t2


def mcmc_run(R, cfg, rng=None, progress=None, init=None):
    """Run burn-in (adapting every step size) then sampling with frozen proposals.

    Returns :class:`PosteriorDraws` holding ``n_samples // thin`` draws.
    ``progress``, if given, is called as ``progress(iteration, total)``.
    ``init`` optionally overrides the starting ``X``, ``params``
    (:class:`PathParams`), ``F``, ``B`` or ``sigma2``.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    run = _Run(R, cfg, rng, init=init)
    K, T, N = cfg.K, R.T, R.N
    n = n_paths(K)
    S = cfg.n_samples // cfg.thin
    rec = {
        "phi_tilde": np.empty((S, n)),
        "level": np.empty((S, n)),
        "sigma": np.empty((S, n)),
        "hyper": np.empty((S, 4)),
        "B": np.empty((S, N, K)),
        "sigma2": np.empty(S),
        "x_last": np.empty((S, n)),
        "f_last": np.empty((S, K)),
        "loglik": np.empty(S),
        "sigma_last": np.empty((S, K, K)),
    }
    sigma_sum = np.zeros((T, K, K))
    corr_sum = np.zeros((T, K, K))
    f_sum = np.zeros((T, K))
    X_store = np.empty((S, n, T)) if cfg.store_full_x else None

    total = cfg.burn_in + cfg.n_samples
    s = 0
    for it in range(total):
        adapting = it < cfg.burn_in
        if it == cfg.burn_in:
            for st in (run.x_state, run.f_state, run.phi_state):
                st.freeze()
        run.sweep(it, adapting)
        if not adapting and (it - cfg.burn_in + 1) % cfg.thin == 0 and s < S:
            t0 = time.perf_counter()
            H, Om = run.slices()
            Sig = kernels.reconstruct(H, Om)
            sigma_sum += Sig
            corr_sum += _corr(Sig)
            f_sum += run.F
            p = run.params
            rec["phi_tilde"][s] = p.phi_tilde
            rec["level"][s] = p.level
            rec["sigma"][s] = p.sigma
            h = run.hyper
            rec["hyper"][s] = (h.mu_h, h.lam_h, h.mu_d, h.lam_d)
            rec["B"][s] = run.B
            rec["sigma2"][s] = run.sigma2
            rec["x_last"][s] = run.X[:, -1]
            rec["f_last"][s] = run.F[-1]
            rec["sigma_last"][s] = Sig[-1]
            rec["loglik"][s] = (
                log_factor_likelihood(R, run.B, run.sigma2, run.F) if run.sigma2 > 0 else np.nan
            )
            if X_store is not None:
                X_store[s] = run.X
            s += 1
            run.timing["record"] += time.perf_counter() - t0
        if progress is not None:
            progress(it + 1, total)

    acceptance = {
        "latent": run.x_state.acceptance_rate,
        "latent_burn_in_last_window": run.x_state.recent_acceptance if cfg.burn_in else float("nan"),
        "persistence": run.phi_state.acceptance_rate,
    }
    if not run.pinned and cfg.factor_sampler == "metropolis":
        acceptance["factors"] = run.f_state.acceptance_rate
    step_sizes = {
        "zeta_x": float(run.x_state.step_size),
        "zeta_f_median": float(np.median(run.f_state.step_size)),
        "persistence_sd": run.phi_state.step_size.tolist(),
    }
    return PosteriorDraws(
        K=K,
        N=N,
        T=T,
        mode=cfg.mode,
        zero_angles=run.zero_angles,
        sigma_sum=sigma_sum,
        corr_sum=corr_sum,
        f_mean=f_sum / S if S else f_sum,
        X=X_store,
        acceptance=acceptance,
        step_sizes=step_sizes,
        timing=dict(run.timing),
        **rec,
    )


def volatility_path_summary(draws, t):
    """Posterior mean ``Sigma_t`` with its volatilities and correlations.

    ``corr_of_mean`` is the correlation matrix of the averaged covariance;
    ``mean_corr`` averages the per-draw correlation matrices.
    """
    if draws.n_draws == 0:
        raise ValueError("no posterior draws")
    if draws.X is not None:
        vals = draws.X[:, :, t]
        H = np.ascontiguousarray(vals[:, : draws.K])
        if draws.zero_angles:
            Om = np.zeros((vals.shape[0], n_angles(draws.K)))
        else:
            Om = np.ascontiguousarray(angle_from_delta(vals[:, draws.K :]))
        Sig = kernels.reconstruct(H, Om)
        mean = Sig.mean(axis=0)
        mean_corr = _corr(Sig).mean(axis=0)
    else:
        mean = draws.sigma_sum[t] / draws.n_draws
        mean_corr = draws.corr_sum[t] / draws.n_draws
    return {
        "mean_cov": mean,
        "volatility": np.sqrt(np.diag(mean)),
        "corr_of_mean": _corr(mean),
        "mean_corr": mean_corr,
    }


def simulate_panel(K, N, T, params, rng, B=None, sigma2=0.0, missing_frac=0.0, zero_angles=False):
    """Simulate returns from the factor MSV model.

    Returns ``(panel, truth)`` where ``truth`` holds ``X``, ``F``, ``B`` and
    ``Sigma`` (``(T, K, K)``).
    """
    X = sample_prior(params, T, rng)
    if zero_angles:
        X[K:] = 0.0
    H = np.ascontiguousarray(X[:K].T)
    Om = np.ascontiguousarray(angle_from_delta(X[K:]).T)
    Sig = kernels.reconstruct(H, Om)
    L = np.linalg.cholesky(Sig)
    F = np.einsum("tij,tj->ti", L, rng.standard_normal((T, K)))
    if B is None:
        B = np.eye(N, K)
    B = np.asarray(B, dtype=float)
    R = F @ B.T
    if sigma2 > 0:
        R = R + np.sqrt(sigma2) * rng.standard_normal((T, N))
    observed = np.ones((T, N), bool)
    if missing_frac > 0:
        observed = rng.uniform(size=(T, N)) >= missing_frac
        observed[0] = True  # keeps every column observed at least once
    panel = ReturnsPanel(R, observed)
    return panel, {"X": X, "F": F, "B": B, "Sigma": Sig, "sigma2": sigma2}

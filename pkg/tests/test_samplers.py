import math

import numpy as np
import pytest
from scipy import stats

from givens_msv import kernels, latent_prior, samplers
from givens_msv.givens import SpectralCov
from givens_msv.latent_prior import PathParams, angle_from_delta, dangle_ddelta, sample_prior
from givens_msv.samplers import (
    AuxLangevinState,
    ConstantLikelihood,
    FactorLikelihood,
    adapt_step_size,
    aux_langevin_step,
)
import oracles


class RecordingRng:
    """Wraps a Generator and records gamma shapes."""

    def __init__(self, seed=0):
        self._g = np.random.default_rng(seed)
        self.shapes = []

    def gamma(self, shape, scale=1.0, size=None):
        self.shapes.append(shape)
        return self._g.gamma(shape, scale, size)

    def __getattr__(self, name):
        return getattr(self._g, name)


# ---------------------------------------------------------------- latent sampler


def test_constant_likelihood_always_accepts(rng):
    params = PathParams.from_phi([0.9, 0.5], [0.0, 1.0], [0.3, 0.2])
    X = sample_prior(params, 20, rng)
    state = AuxLangevinState(step_size=5.0)
    for _ in range(50):
        X, acc, _ = aux_langevin_step(X, ConstantLikelihood(3.0), params, state, rng)
        assert acc


def test_prior_invariance_short_chain():
    rng = np.random.default_rng(1)
    phi, sigma = np.array([0.9, 0.0, -0.5]), np.array([0.5, 1.0, 0.3])
    params = PathParams.from_phi(phi, [1.0, -2.0, 0.0], sigma)
    X = sample_prior(params, 50, rng)
    state = AuxLangevinState(step_size=0.5)
    draws = []
    for _ in range(4000):
        X, _, _ = aux_langevin_step(X, ConstantLikelihood(), params, state, rng)
        draws.append(X[:, 25].copy())
    draws = np.array(draws)
    var = sigma**2 / (1 - phi**2)
    for p in range(3):
        se = oracles.mc_se(draws[:, p])
        assert abs(draws[:, p].mean() - params.level[p]) < 4 * se
        assert draws[:, p].var() == pytest.approx(var[p], rel=0.25)


def test_prior_density_never_evaluated(monkeypatch, rng):
    def boom(*a, **k):
        raise AssertionError("prior density evaluated")

    monkeypatch.setattr(latent_prior, "prior_log_density", boom)
    monkeypatch.setattr(latent_prior, "ar1_loglik", boom)
    monkeypatch.setattr(samplers, "_ar1_phi_loglik", boom)
    params = PathParams.from_phi([0.9] * 3, [0.0] * 3, [0.2] * 3)
    F = rng.normal(size=(15, 2))
    lik = FactorLikelihood(F, 2)
    X = sample_prior(params, 15, rng)
    state = AuxLangevinState(step_size=0.05)
    cur = None
    for _ in range(20):
        X, _, cur = aux_langevin_step(X, lik, params, state, rng, current=cur)


def test_one_likelihood_evaluation_per_step(rng):
    params = PathParams.from_phi([0.9] * 3, [0.0] * 3, [0.2] * 3)
    lik = FactorLikelihood(rng.normal(size=(10, 2)), 2)
    X = sample_prior(params, 10, rng)
    state = AuxLangevinState(step_size=0.05)
    _, _, cur = aux_langevin_step(X, lik, params, state, rng)
    assert lik.n_calls == 2
    for _ in range(10):
        X, _, cur = aux_langevin_step(X, lik, params, state, rng, current=cur)
    assert lik.n_calls == 12
    # cached value and gradient are those of the returned state
    ll, g = lik(X)
    assert cur[0] == pytest.approx(ll)
    np.testing.assert_allclose(cur[1], g)


def test_nonfinite_proposal_is_rejected(rng):
    class NanAway:
        def __init__(self):
            self.first = True

        def __call__(self, values):
            if self.first:
                self.first = False
                return 0.0, np.zeros_like(values)
            return np.nan, np.zeros_like(values)

    params = PathParams.from_phi([0.5], [0.0], [1.0])
    X = np.zeros((1, 4))
    X2, acc, _ = aux_langevin_step(X, NanAway(), params, AuxLangevinState(step_size=1.0), rng)
    assert not acc and np.array_equal(X2, X)


def test_factor_likelihood_gradient_matches_fd(rng):
    K, T = 3, 5
    lik = FactorLikelihood(rng.normal(size=(T, K)), K)
    X = rng.normal(0, 0.5, (6, T))
    _, g = lik(X)
    eps = 1e-6
    for idx in [(0, 0), (2, 4), (3, 1), (5, 3)]:
        e = np.zeros_like(X)
        e[idx] = eps
        fd = (lik(X + e)[0] - lik(X - e)[0]) / (2 * eps)
        assert g[idx] == pytest.approx(fd, rel=1e-5, abs=1e-8)
    _, gz = FactorLikelihood(lik.F, K, zero_angles=True)(X)
    assert np.all(gz[K:] == 0)


def test_gradient_off_proposal_reduces_to_random_walk():
    # with a flat prior (Q -> 0) the two-stage proposal is Y ~ N(X + zeta/2 D, zeta I)
    rng = np.random.default_rng(5)
    zeta, n = 0.3, 200_000
    X = np.array([[0.5, -1.0, 2.0]])
    D = np.array([[1.0, 0.0, -2.0]])
    U = X + 0.5 * zeta * D + math.sqrt(0.5 * zeta) * rng.standard_normal((n, 3))
    Yb = kernels.tridiag_sample(
        np.full(n, 0.4), np.full(n, 1e7), np.zeros(n), zeta, U, rng.standard_normal((n, 3))
    )
    np.testing.assert_allclose(Yb.mean(axis=0), (X + 0.5 * zeta * D)[0], atol=4 * math.sqrt(zeta / n))
    np.testing.assert_allclose(np.cov(Yb.T), zeta * np.eye(3), atol=0.01)


def test_gradient_off_proposal_dense_formula():
    # exact proposal law for one path of length 3 against dense algebra
    zeta, phi, sigma, level = 0.5, 0.6, 0.8, 0.3
    T = 3
    Q = oracles.ar1_dense(phi, sigma, T)
    A = np.eye(T) + 0.5 * zeta * Q
    params = PathParams.from_phi([phi], [level], [sigma])
    U = np.array([[0.2, -0.1, 0.7]])
    mean = latent_prior.solve_and_sample(params, zeta, U, Z=np.zeros((1, T)))[0]
    np.testing.assert_allclose(mean, np.linalg.solve(A, U[0] + 0.5 * zeta * Q @ np.full(T, level)), rtol=1e-12)
    # the proposal covariance is linear in Z
    cols = [latent_prior.solve_and_sample(params, zeta, U, Z=np.eye(T)[[k]])[0] - mean for k in range(T)]
    M = np.array(cols).T
    np.testing.assert_allclose(M @ M.T, 0.5 * zeta * np.linalg.inv(A), rtol=1e-10)


class _ToyLik:
    """2 paths of length 1: eigenvalue h_1 (h_2 = 0) and one transformed angle."""

    def __init__(self, f):
        self.f = np.asarray(f, dtype=float)[None, :]

    def logpost_parts(self, h, d):
        H = np.column_stack([h, np.zeros_like(h)])
        W = angle_from_delta(d)[:, None]
        ld, gh, gw = kernels.logdens_grad(H, W, np.broadcast_to(self.f, H.shape))
        return ld, gh[:, 0], gw[:, 0] * dangle_ddelta(d)

    def __call__(self, values):
        ld, gh, gd = self.logpost_parts(values[0], values[1])
        return float(ld[0]), np.array([[gh[0]], [gd[0]]])


@pytest.mark.slow
def test_detailed_balance_against_quadrature():
    rng = np.random.default_rng(7)
    lik = _ToyLik([1.5, -0.4])
    params = PathParams.from_phi([0.5, 0.3], [0.2, 0.1], [0.8, 1.0])
    sd = params.sigma / np.sqrt(1 - params.phi**2)
    # grid posterior
    gh = np.linspace(-6, 6, 801)
    gd = np.linspace(-8, 8, 801)
    Hh, Dd = np.meshgrid(gh, gd, indexing="ij")
    ld, _, _ = lik.logpost_parts(Hh.ravel(), Dd.ravel())
    logp = ld.reshape(Hh.shape) + stats.norm.logpdf(Hh, 0.2, sd[0]) + stats.norm.logpdf(Dd, 0.1, sd[1])
    p = np.exp(logp - logp.max())
    cdf_h = np.cumsum(p.sum(axis=1))
    cdf_h /= cdf_h[-1]
    cdf_d = np.cumsum(p.sum(axis=0))
    cdf_d /= cdf_d[-1]

    X = np.array([[0.2], [0.1]])
    state = AuxLangevinState(step_size=1.0)
    cur = None
    for _ in range(3000):
        X, acc, cur = aux_langevin_step(X, lik, params, state, rng, current=cur)
        adapt_step_size(state, acc)
    state.freeze()
    thin, n = 4, 100_000
    out = np.empty((n, 2))
    for k in range(n * thin):
        X, acc, cur = aux_langevin_step(X, lik, params, state, rng, current=cur)
        if k % thin == 0:
            out[k // thin] = X[:, 0]

    def ks(samples, grid, cdf):
        s = np.sort(samples)
        emp = np.searchsorted(s, grid, side="right") / s.size
        return np.max(np.abs(emp - cdf))

    assert ks(out[:, 0], gh, cdf_h) < 0.02
    assert ks(out[:, 1], gd, cdf_d) < 0.02


def test_matches_dense_mala_reference():
    """E[log-likelihood] under the auxiliary chain and a plain dense MALA chain."""
    rng = np.random.default_rng(11)
    K, T = 2, 30
    params = PathParams.from_phi([0.9, 0.9, 0.8], [0.0, -0.5, 0.3], [0.3, 0.3, 0.3])
    truth = sample_prior(params, T, rng)
    H, W = latent_prior.LatentPaths(K, truth).slice_arrays()
    F = kernels.rotate(W, np.exp(0.5 * H) * rng.standard_normal((T, K)))
    lik = FactorLikelihood(F, K)
    n_iter, burn = 30_000, 3_000

    X = truth.copy()
    st = AuxLangevinState(step_size=0.05)
    cur = None
    aux = []
    for it in range(n_iter):
        X, acc, cur = aux_langevin_step(X, lik, params, st, rng, current=cur)
        if it < burn:
            adapt_step_size(st, acc)
        elif it == burn:
            st.freeze()
        else:
            aux.append(cur[0])

    Qs = [oracles.ar1_dense(params.phi[p], params.sigma[p], T) for p in range(3)]

    def logpost(x):
        ll, g = lik(x)
        lp = 0.0
        gp = np.empty_like(x)
        for p in range(3):
            dev = x[p] - params.level[p]
            q = Qs[p] @ dev
            lp -= 0.5 * dev @ q
            gp[p] = -q
        return ll + lp, ll, g + gp

    X = truth.copy()
    eps = 0.01
    cur = logpost(X)
    ref = []
    n_acc = 0
    for it in range(n_iter):
        lpx, llx, gx = cur
        Y = X + 0.5 * eps * gx + math.sqrt(eps) * rng.standard_normal(X.shape)
        prop = logpost(Y)
        lpy, _, gy = prop
        fwd = -np.sum((Y - X - 0.5 * eps * gx) ** 2) / (2 * eps)
        bwd = -np.sum((X - Y - 0.5 * eps * gy) ** 2) / (2 * eps)
        if math.log(rng.uniform()) < lpy - lpx + bwd - fwd:
            X, cur = Y, prop
            n_acc += 1
        if it < burn:
            eps *= math.exp((it + 1) ** -0.6 * ((X is Y) - 0.57))
        else:
            ref.append(cur[1])
    aux, ref = np.array(aux), np.array(ref)
    se = math.hypot(oracles.mc_se(aux), oracles.mc_se(ref))
    assert abs(aux.mean() - ref.mean()) < 3 * se


# ---------------------------------------------------------------- adaptation


def test_adaptation_monotone():
    up = AuxLangevinState(step_size=0.1)
    down = AuxLangevinState(step_size=0.1)
    prev_up, prev_down = up.step_size, down.step_size
    for _ in range(1000):
        adapt_step_size(up, True)
        adapt_step_size(down, False)
        assert up.step_size > prev_up and down.step_size < prev_down
        prev_up, prev_down = up.step_size, down.step_size
    frozen = AuxLangevinState(step_size=0.1)
    frozen.freeze()
    adapt_step_size(frozen, True)
    assert frozen.step_size == 0.1 and frozen.acceptance_rate == 1.0


def test_adaptation_targets_defaults():
    assert AuxLangevinState(use_gradient=True).target_acceptance == 0.55
    assert AuxLangevinState(use_gradient=False).target_acceptance == 0.25
    with pytest.raises(ValueError):
        AuxLangevinState(step_size=-1.0)
    with pytest.raises(ValueError):
        AuxLangevinState(target_acceptance=1.5)


@pytest.mark.parametrize("use_gradient, lo, hi", [(True, 0.5, 0.6), (False, 0.2, 0.3)])
def test_adaptation_reaches_target_on_toy(use_gradient, lo, hi):
    rng = np.random.default_rng(21)
    K, T = 2, 40
    params = PathParams.from_phi([0.95] * 3, [0.0] * 3, [0.2] * 3)
    X = sample_prior(params, T, rng)
    H, W = latent_prior.LatentPaths(K, X).slice_arrays()
    F = kernels.rotate(W, np.exp(0.5 * H) * rng.standard_normal((T, K)))
    lik = FactorLikelihood(F, K)
    state = AuxLangevinState(step_size=0.01, use_gradient=use_gradient)
    cur = None
    for _ in range(8000):
        X, acc, cur = aux_langevin_step(X, lik, params, state, rng, current=cur)
        adapt_step_size(state, acc)
    assert lo <= state.recent_acceptance <= hi


# ---------------------------------------------------------------- factor steps


def test_factor_metropolis_prior_invariant_when_unloaded():
    rng = np.random.default_rng(3)
    K, T = 3, 4000
    cov = SpectralCov([0.5, -0.2, 0.1], [0.4, -0.7, 0.2])
    S = kernels.reconstruct(cov.log_eigenvalues[None], cov.angles[None])[0]
    H = np.tile(cov.log_eigenvalues, (T, 1))
    W = np.tile(cov.angles, (T, 1))
    F = np.zeros((T, K))
    B = np.zeros((3, K))
    R = rng.normal(size=(T, 3))
    mask = np.ones((T, 3), bool)
    for _ in range(30):
        F, acc = samplers.factor_sweep_metropolis(F, R, mask, B, 1.0, H, W, 0.7, rng)
        assert acc.all()
    # T independent chains at stationarity: cross-sectional moments
    emp = np.cov(F.T)
    se = np.sqrt((S**2 + np.outer(np.diag(S), np.diag(S))) / T)
    assert np.all(np.abs(emp - S) < 4 * se)


def test_factor_gibbs_examples():
    rng = np.random.default_rng(4)
    T = 40_000
    r = np.array([1.0, -2.0])
    H = np.zeros((T, 2))
    W = np.zeros((T, 1))
    F = samplers.factor_sweep_gibbs(np.tile(r, (T, 1)), np.ones((T, 2), bool), np.eye(2), 1.0, H, W, rng)
    np.testing.assert_allclose(F.mean(axis=0), r / 2, atol=4 * math.sqrt(0.5 / T))
    np.testing.assert_allclose(np.cov(F.T), 0.5 * np.eye(2), atol=0.02)
    # sigma2 -> infinity leaves the prior
    cov = SpectralCov([0.3, -0.4], [0.6])
    S = samplers.kernels.reconstruct(cov.log_eigenvalues[None], cov.angles[None])[0]
    Fp = samplers.factor_sweep_gibbs(
        np.tile(r, (T, 1)), np.ones((T, 2), bool), np.eye(2), 1e12, np.tile(cov.log_eigenvalues, (T, 1)), np.tile(cov.angles, (T, 1)), rng
    )
    np.testing.assert_allclose(np.cov(Fp.T), S, atol=0.04)


def test_factor_gibbs_dense_oracle():
    rng = np.random.default_rng(5)
    K, N, T = 3, 5, 50_000
    B = rng.normal(size=(N, K))
    sigma2 = 0.7
    cov = SpectralCov(rng.normal(size=K), rng.uniform(-1, 1, 3))
    S = oracles.dense_sigma(cov.log_eigenvalues, cov.angles)
    r = rng.normal(size=N)
    M = B.T @ B / sigma2 + np.linalg.inv(S)
    mean = np.linalg.solve(M, B.T @ r / sigma2)
    covf = np.linalg.inv(M)
    F = samplers.factor_sweep_gibbs(
        np.tile(r, (T, 1)), np.ones((T, N), bool), B, sigma2,
        np.tile(cov.log_eigenvalues, (T, 1)), np.tile(cov.angles, (T, 1)), rng,
    )
    se = np.sqrt(np.diag(covf) / T)
    assert np.all(np.abs(F.mean(axis=0) - mean) < 4 * se)
    np.testing.assert_allclose(np.cov(F.T), covf, atol=5 * np.sqrt(np.outer(np.diag(covf), np.diag(covf)) * 2 / T).max())


def test_factor_gibbs_ignores_unobserved_cells():
    rng = np.random.default_rng(6)
    B = rng.normal(size=(4, 2))
    cov = SpectralCov([0.1, 0.2], [0.3])
    r = rng.normal(size=4)
    obs = np.array([True, False, True, True])
    a = samplers.factor_step_gibbs(r, B, 0.5, cov, np.random.default_rng(1), observed=obs)
    r2 = r.copy()
    r2[1] = 1e6
    b = samplers.factor_step_gibbs(r2, B, 0.5, cov, np.random.default_rng(1), observed=obs)
    c = samplers.factor_step_gibbs(r[obs], B[obs], 0.5, cov, np.random.default_rng(1))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a, c)


def test_factor_metropolis_single_slice_wrapper(rng):
    cov = SpectralCov([0.0, 0.0], [0.0])
    f, acc = samplers.factor_step_metropolis(np.zeros(2), [1.0, 2.0, np.nan], np.eye(3, 2), 1.0, cov, 0.5, rng, observed=[True, True, False])
    assert f.shape == (2,) and isinstance(acc, bool) and np.all(np.isfinite(f))


def test_factor_metropolis_agrees_with_gibbs_small():
    rng = np.random.default_rng(8)
    K, N, T = 2, 3, 6
    B = np.array([[1.0, 0.0], [0.6, 1.0], [-0.4, 0.8]])
    sigma2 = 0.5
    H = rng.normal(0, 0.3, (T, K))
    W = rng.uniform(-0.8, 0.8, (T, 1))
    R = rng.normal(size=(T, N))
    mask = np.ones((T, N), bool)
    n = 20_000
    Fm = np.zeros((T, K))
    zeta = np.full(T, 0.5)
    fsum = np.zeros((T, K))
    state = AuxLangevinState(step_size=zeta)
    for it in range(n + 2000):
        Fm, acc = samplers.factor_sweep_metropolis(Fm, R, mask, B, sigma2, H, W, state.step_size, rng)
        if it < 2000:
            adapt_step_size(state, acc)
        else:
            fsum += Fm
    exact = np.empty((T, K))
    for t in range(T):
        S = oracles.dense_sigma(H[t], W[t])
        M = B.T @ B / sigma2 + np.linalg.inv(S)
        exact[t] = np.linalg.solve(M, B.T @ R[t] / sigma2)
    # loose: posterior sd <= 1, ESS of a Langevin chain at ~55% acceptance is > n/20
    np.testing.assert_allclose(fsum / n, exact, atol=4 * math.sqrt(20 / n))


# ---------------------------------------------------------------- conjugate blocks


def test_loading_pattern():
    free, B = samplers.loading_pattern(4, 3)
    np.testing.assert_array_equal(B[:3], np.eye(3))
    assert not free[:3][np.triu_indices(3)].any()
    assert free[1, 0] and free[2, :2].all() and free[3].all()


def test_gibbs_loadings_constraints_and_limits():
    rng = np.random.default_rng(9)
    K, N, T = 2, 5, 400
    free, Btrue = samplers.loading_pattern(N, K)
    Btrue[free] = rng.normal(size=free.sum())
    F = rng.normal(size=(T, K))
    R = F @ Btrue.T
    mask = rng.uniform(size=(T, N)) > 0.1
    R = np.where(mask, R, 999.0)
    B = samplers.gibbs_loadings(F, R, mask, 1e-10, 10.0, rng)
    assert B[0, 0] == 1.0 and B[0, 1] == 0.0 and B[1, 1] == 1.0
    np.testing.assert_allclose(B, Btrue, atol=1e-3)
    Bz = samplers.gibbs_loadings(F, R, mask, 1.0, 1e-12, rng)
    np.testing.assert_allclose(Bz[free], 0.0, atol=1e-4)
    # square case: lower unit triangular, first row fully fixed
    Bsq = samplers.gibbs_loadings(F, R[:, :2], mask[:, :2], 1.0, 10.0, rng)
    np.testing.assert_array_equal(Bsq[0], [1.0, 0.0])
    assert Bsq[1, 1] == 1.0 and Bsq[1, 0] != 0.0


def test_gibbs_sigma2():
    rng = RecordingRng(1)
    draws = np.array([samplers.gibbs_sigma2([], 3.0, 2.0, rng) for _ in range(20_000)])
    assert rng.shapes[0] == 3.0
    # inverse-gamma(3, 2) has mean 1
    assert draws.mean() == pytest.approx(1.0, abs=0.05)
    g = np.random.default_rng(2)
    res = g.normal(0, 0.3, 1_000_000)
    post = np.array([samplers.gibbs_sigma2(res, 2.5, 0.025, g) for _ in range(50)])
    assert post.mean() == pytest.approx(0.09, rel=0.01)
    assert np.all(post > 0)


def test_level_conditional_iid_case():
    g = np.random.default_rng(3)
    T = 25
    x = g.normal(1.0, 1.0, (1, T))
    sigma = 0.7
    lv = np.array([
        samplers.gibbs_path_level_and_variance(x, np.array([0.0]), np.array([sigma]), 2.5, 0.025, g)[0][0]
        for _ in range(20_000)
    ])
    assert lv.mean() == pytest.approx(x.mean(), abs=4 * sigma / math.sqrt(T * 20_000))
    assert lv.var() == pytest.approx(sigma**2 / T, rel=0.05)
    rec = RecordingRng(0)
    samplers.gibbs_path_level_and_variance(x, np.array([0.5]), np.array([sigma]), 2.5, 0.025, rec)
    assert rec.shapes == [2.5 + T / 2]


def test_level_and_variance_recover_truth():
    g = np.random.default_rng(4)
    params = PathParams.from_phi([0.9], [1.5], [0.3])
    x = sample_prior(params, 20_000, g)
    sig = np.array([1.0])
    lv, s2 = [], []
    for _ in range(500):
        level, sigma2 = samplers.gibbs_path_level_and_variance(x, params.phi, sig, 2.5, 0.025, g)
        sig = np.sqrt(sigma2)
        lv.append(level[0])
        s2.append(sigma2[0])
    lv, s2 = np.array(lv[50:]), np.array(s2[50:])
    assert abs(lv.mean() - 1.5) < 3 * lv.std() + 1e-3
    assert abs(s2.mean() - 0.09) < 3 * s2.std() + 1e-4


def test_mh_persistence():
    g = np.random.default_rng(5)
    x = np.zeros((1, 10))
    pt, acc = samplers.mh_persistence(np.array([1.0]), x, np.array([0.0]), np.array([1.0]), 3.0, 4.0, 0.0, g)
    assert acc[0] and pt[0] == 1.0

    params = PathParams.from_phi(np.full(4, 0.95), np.zeros(4), np.full(4, 0.2))
    x = sample_prior(params, 3000, g)
    pt = np.zeros(4)
    out = []
    for it in range(4000):
        pt, _ = samplers.mh_persistence(pt, x, params.level, params.sigma, 0.0, 1e-3, 0.3, g)
        if it >= 1000:
            out.append(latent_prior.phi_from_tilde(pt))
    out = np.array(out)
    assert np.all(np.abs(out.mean(axis=0) - 0.95) < 3 * out.std(axis=0))

    pt = np.array([2.02])
    out = []
    for _ in range(2000):
        pt, _ = samplers.mh_persistence(pt, x[:1], params.level[:1], params.sigma[:1], 2.0, 1e8, 1e-3, g)
        out.append(pt[0])
    assert np.mean(out[1000:]) == pytest.approx(2.0, abs=1e-3)


def test_gibbs_hyper():
    g = np.random.default_rng(6)
    mus = np.array([samplers.gibbs_hyper([1.7], 3.0, 1e-8, 2.0, 0.5, g)[0] for _ in range(5000)])
    assert np.median(mus) == pytest.approx(1.7, abs=0.05)
    vals = g.normal(2.4, 0.5, 10_000)
    draws = np.array([samplers.gibbs_hyper(vals, 3.0, 0.01, 2.0, 0.5, g) for _ in range(400)])
    assert abs(draws[:, 0].mean() - vals.mean()) < 3 * draws[:, 0].std()
    assert draws[:, 1].mean() == pytest.approx(4.0, rel=0.05)
    rec = RecordingRng(0)
    samplers.gibbs_hyper(np.ones(7), 3.0, 0.01, 2.0, 0.5, rec)
    assert rec.shapes == [2.0 + 3.5]

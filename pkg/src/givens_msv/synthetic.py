"""Reproducible synthetic panels drawn from the generative model."""

import numpy as np

from .latent_prior import PathParams, delta_from_angle, n_paths
from .model import simulate_panel
from .samplers import loading_pattern

__all__ = ["BUNDLE", "bundle", "default_truth", "generate"]

# the shipped synthetic dataset used by the CLI smoke runs and adaptation checks
BUNDLE = {"K": 2, "N": 6, "T": 400, "mode": "factor", "sigma2": 0.2, "missing_frac": 0.01, "seed": 20140511}


def default_truth(K, rng, phi_h=0.98, phi_d=0.98, sigma_h=0.1, sigma_d=0.05, angle_scale=0.6):
    """Persistent log-eigenvalue and angle dynamics around random levels."""
    m = n_paths(K) - K
    level_h = rng.normal(0.0, 0.3, K)
    level_d = delta_from_angle(rng.uniform(-angle_scale, angle_scale, m))
    return PathParams.from_phi(
        np.r_[np.full(K, phi_h), np.full(m, phi_d)],
        np.r_[level_h, level_d],
        np.r_[np.full(K, sigma_h), np.full(m, sigma_d)],
    )


def random_loadings(N, K, rng):
    free, B = loading_pattern(N, K)
    B[free] = rng.normal(0.7, 0.3, free.sum())
    return B


def generate(K, N, T, rng, mode="factor", sigma2=None, missing_frac=0.0, params=None, zero_angles=False):
    """Simulate a panel; returns ``(panel, truth)`` with ``truth["params"]`` attached."""
    params = default_truth(K, rng) if params is None else params
    if mode == "basic":
        if N != K:
            raise ValueError("basic mode needs N == K")
        B = np.eye(K)
        sigma2 = 0.0 if sigma2 is None else sigma2
    else:
        B = random_loadings(N, K, rng)
        sigma2 = 0.2 if sigma2 is None else sigma2
    panel, truth = simulate_panel(
        K, N, T, params, rng, B=B, sigma2=sigma2, missing_frac=missing_frac, zero_angles=zero_angles
    )
    truth["params"] = params
    return panel, truth


def bundle():
    """The shipped synthetic dataset (fixed seed)."""
    b = BUNDLE
    rng = np.random.default_rng(b["seed"])
    return generate(b["K"], b["N"], b["T"], rng, mode=b["mode"], sigma2=b["sigma2"], missing_frac=b["missing_frac"])

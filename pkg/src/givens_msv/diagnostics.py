"""Effective sample sizes by Geyer's initial monotone sequence estimator."""

import numpy as np

__all__ = ["ESSResult", "autocovariance", "ess", "ess_table"]

MIN_DRAWS = 100


def autocovariance(x):
    """Biased autocovariance at all lags via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    return acov / n


class ESSResult(float):
    """ESS value that also records whether the chain was degenerate (zero variance)."""

    degenerate: bool

    def __new__(cls, value, degenerate=False):
        obj = super().__new__(cls, value)
        obj.degenerate = degenerate
        return obj


def ess(x):
    """Effective sample size of a scalar chain.

    Sums autocorrelation pairs ``rho_{2k} + rho_{2k+1}`` while positive, forcing
    the pair sums to be non-increasing. A constant chain returns its length
    flagged ``degenerate=True``.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 4:
        raise ValueError("need at least 4 draws")
    if np.ptp(x) == 0:
        return ESSResult(float(n), degenerate=True)
    acov = autocovariance(x)
    rho = acov / acov[0]
    pairs = []
    running = np.inf
    for k in range(0, n - 1, 2):
        g = rho[k] + rho[k + 1]
        if g <= 0:
            break
        running = min(running, g)
        pairs.append(running)
    tau = -1.0 + 2.0 * float(np.sum(pairs)) if pairs else 1.0
    tau = max(tau, 1.0 / np.log10(max(n, 10)))
    return ESSResult(n / tau)


def ess_table(chains, seconds=None):
    """ESS per named chain plus min/max and seconds per minimum ESS.

    ``chains`` maps names to 1-d draw arrays of equal length (>= 100).
    """
    rows = {}
    for name, x in chains.items():
        x = np.asarray(x, dtype=float)
        if x.size < MIN_DRAWS:
            raise ValueError(f"{name}: need at least {MIN_DRAWS} draws, got {x.size}")
        e = ess(x)
        rows[name] = {"ess": float(e), "degenerate": e.degenerate}
    live = [r["ess"] for r in rows.values() if not r["degenerate"]]
    summary = {
        "min_ess": min(live) if live else float("nan"),
        "max_ess": max(live) if live else float("nan"),
        "n_degenerate": sum(r["degenerate"] for r in rows.values()),
    }
    if seconds is not None and live:
        summary["seconds"] = seconds
        summary["seconds_per_min_ess"] = seconds / summary["min_ess"]
    return rows, summary

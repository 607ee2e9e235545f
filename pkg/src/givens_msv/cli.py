"""Command-line interface.

Subcommands: ``fit`` (MCMC plus summaries and forecasts), ``forecast``,
``predlik``, ``simulate`` and ``diagnose``. Exit codes: 0 success, 2 config
error, 3 data error, 4 numerical failure.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import replace
import json
import logging
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import kernels
from .diagnostics import ess_table
from .forecast import (
    FixedParams,
    ParticleCloud,
    WeightCollapseError,
    discrepancies,
    log_bayes_factor,
    min_variance_weights,
    predict_sigma,
    predictive_loglik,
)
from .io import (
    MANIFEST_VERSION,
    ConfigError,
    DataError,
    export_panel,
    fmt,
    ingest,
    load_draws,
    parse_config,
    read_matrix_csv,
    save_draws,
    write_long_csv,
    write_matrix_csv,
)
from .model import NumericalError, mcmc_run
from .synthetic import BUNDLE, bundle, generate

log = logging.getLogger("givens_msv")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "GIVENS_MSV_THREADS"


def _threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer") from None


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _write_weights(path, names, w):
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("asset", "weight"))
        for n, v in zip(names, w):
            wr.writerow((n, fmt(v)))


def _write_predlik(path, columns):
    names = list(columns)
    M = len(next(iter(columns.values())))
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["step"] + names)
        for t in range(M):
            wr.writerow([t + 1] + [fmt(columns[n][t]) for n in names])


def _forecast_outputs(out, draws, names, horizon, rng, proxy=None):
    pred = predict_sigma(draws, horizon=horizon, rng=rng)
    sig = pred.asset_mean
    write_matrix_csv(out / "sigma_forecast.csv", sig)
    w = min_variance_weights(sig)
    _write_weights(out / "weights.csv", names, w)
    info = {"horizon": horizon, "n_draws": draws.n_draws}
    if proxy is not None:
        mad, rmse = discrepancies(sig, proxy)
        info.update(mad=mad, rmse=rmse)
    return info


def _diagnostics(draws, seconds):
    if draws.n_draws < 100:
        return None
    rows, summary = ess_table(draws.monitored(), seconds=seconds)
    return {"per_parameter": rows, "summary": summary}


def _fit_one(panel, cfg, run, out, proxy=None):
    """Run one chain and write its outputs; returns the manifest dict."""
    out.mkdir(parents=True, exist_ok=True)
    holdout = run["holdout"]
    if holdout >= panel.T:
        raise ConfigError(f"holdout={holdout} leaves no data to fit")
    train = panel.head(panel.T - holdout) if holdout else panel
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    try:
        draws = mcmc_run(train, cfg, rng)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    seconds = time.perf_counter() - t0
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "backend": kernels.BACKEND,
        "config": cfg.to_dict(),
        "run": run,
        "data": {"T": train.T, "N": train.N, "missing": train.n_missing, "holdout": holdout},
        "n_draws": draws.n_draws,
        "acceptance": draws.acceptance,
        "step_sizes": draws.step_sizes,
        "timing_seconds": dict(draws.timing, total=seconds),
        "outputs": [],
    }
    if draws.n_draws:
        save_draws(out / "posterior.npz", draws, config=cfg.to_dict())
        manifest["outputs"].append("posterior.npz")
        if run["emit_panels"]:
            S = draws.sigma_sum / draws.n_draws
            C = draws.corr_sum / draws.n_draws
            _write_vol(out / "volatility.csv", np.sqrt(np.einsum("tii->ti", S)))
            write_long_csv(out / "correlation.csv", C, diagonal=False)
            manifest["outputs"] += ["volatility.csv", "correlation.csv"]
        manifest["forecast"] = _forecast_outputs(
            out, draws, train.names, run["horizon"], np.random.default_rng([cfg.seed, 1]), proxy
        )
        manifest["outputs"] += ["sigma_forecast.csv", "weights.csv"]
        if holdout:
            params = FixedParams.from_draws(draws)
            prng = np.random.default_rng([cfg.seed, 2])
            cloud = ParticleCloud.from_draws(draws, run["n_particles"], prng)
            future = panel.tail(panel.T - holdout)
            steps, cum = predictive_loglik(
                future.values, params, cloud, prng, variant=run["pf_variant"], observed=future.observed
            )
            _write_predlik(out / "predlik.csv", {"loglik": steps, "cumulative": np.cumsum(steps)})
            manifest["predictive"] = {"cumulative_loglik": cum, "steps": int(steps.size)}
            manifest["outputs"].append("predlik.csv")
        manifest["diagnostics"] = _diagnostics(draws, seconds)
    _write_json(out / "manifest.json", manifest)
    return manifest


def _write_vol(path, vol):
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("day", "i", "j", "value"))
        for t in range(vol.shape[0]):
            for i in range(vol.shape[1]):
                wr.writerow((t, i, i, fmt(vol[t, i])))


def _fit_chain(args):
    panel, cfg, run, out, proxy = args
    return _fit_one(panel, cfg, run, Path(out), proxy)


def cmd_fit(ns):
    text = Path(ns.config).read_text() if ns.config else ""
    cfg, run = parse_config(text, ns.set or [])
    panel = ingest(ns.data)
    if cfg.K > panel.N:
        raise ConfigError(f"K={cfg.K} exceeds N={panel.N}")
    proxy = read_matrix_csv(ns.proxy) if ns.proxy else None
    if proxy is not None and proxy.shape != (panel.N, panel.N):
        raise DataError(f"proxy must be {panel.N}x{panel.N}, got {proxy.shape}")
    out = Path(ns.out)
    if run["chains"] == 1:
        m = _fit_one(panel, cfg, run, out, proxy)
        _report(m)
        return EXIT_OK
    jobs = [
        (panel, replace(cfg, seed=cfg.seed + c), run, str(out / f"chain_{c}"), proxy)
        for c in range(run["chains"])
    ]
    workers = min(_threads(), len(jobs))
    if workers == 1:
        results = [_fit_chain(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_chain, jobs))
    for m in results:
        _report(m)
    return EXIT_OK


def _report(m):
    acc = ", ".join(f"{k}={v:.3f}" for k, v in m["acceptance"].items() if isinstance(v, float))
    print(f"draws={m['n_draws']} acceptance: {acc}")


def cmd_forecast(ns):
    draws, _ = load_draws(Path(ns.fit) / "posterior.npz" if Path(ns.fit).is_dir() else ns.fit)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    proxy = read_matrix_csv(ns.proxy) if ns.proxy else None
    if proxy is not None and proxy.shape != (draws.N, draws.N):
        raise DataError(f"proxy must be {draws.N}x{draws.N}, got {proxy.shape}")
    names = [f"x{i}" for i in range(draws.N)]
    info = _forecast_outputs(out, draws, names, ns.horizon, np.random.default_rng(ns.seed), proxy)
    _write_json(out / "forecast.json", info)
    if "mad" in info:
        print(f"MAD={info['mad']:.6g} RMSE={info['rmse']:.6g}")
    return EXIT_OK


def cmd_predlik(ns):
    future = ingest(ns.future)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    columns, cums = {}, {}
    for label, fit in (("a", ns.fit_a), ("b", ns.fit_b)):
        draws, _ = load_draws(Path(fit) / "posterior.npz" if Path(fit).is_dir() else fit)
        if draws.N != future.N:
            raise DataError(f"model {label} has N={draws.N}, future data has N={future.N}")
        rng = np.random.default_rng(ns.seed)
        cloud = ParticleCloud.from_draws(draws, ns.n_particles, rng)
        steps, cum = predictive_loglik(
            future.values, FixedParams.from_draws(draws), cloud, rng,
            variant=ns.variant, observed=future.observed,
        )
        columns[f"loglik_{label}"] = steps
        columns[f"cumulative_{label}"] = np.cumsum(steps)
        cums[label] = cum
    _write_predlik(out / "predlik.csv", columns)
    lbf = log_bayes_factor(cums["a"], cums["b"])
    _write_json(out / "predlik.json", {"cumulative_a": cums["a"], "cumulative_b": cums["b"], "log_bayes_factor": lbf})
    print(f"log predictive Bayes factor (a vs b): {lbf:.4f}")
    return EXIT_OK


def cmd_simulate(ns):
    if ns.bundle:
        panel, truth = bundle()
    else:
        rng = np.random.default_rng(ns.seed)
        N = ns.N if ns.N is not None else ns.K
        try:
            panel, truth = generate(
                ns.K, N, ns.T, rng, mode=ns.mode, sigma2=ns.sigma2,
                missing_frac=ns.missing, zero_angles=ns.zero_angles,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    export_panel(panel, ns.out)
    if ns.truth:
        p = truth["params"]
        np.savez_compressed(
            ns.truth, X=truth["X"], F=truth["F"], B=truth["B"], Sigma=truth["Sigma"],
            sigma2=truth["sigma2"], phi=p.phi, level=p.level, sigma=p.sigma,
        )
    return EXIT_OK


def cmd_diagnose(ns):
    draws, _ = load_draws(Path(ns.fit) / "posterior.npz" if Path(ns.fit).is_dir() else ns.fit)
    try:
        rows, summary = ess_table(draws.monitored())
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    target = Path(ns.out) if ns.out else None
    fh = target.open("w", newline="") if target else sys.stdout
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("parameter", "ess", "degenerate"))
        for name, r in rows.items():
            wr.writerow((name, fmt(r["ess"]), int(r["degenerate"])))
    finally:
        if target:
            fh.close()
    print(f"min ESS {summary['min_ess']:.1f}, max ESS {summary['max_ess']:.1f}", file=sys.stderr)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="givens-msv", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="run MCMC, write summaries, forecasts and manifest")
    f.add_argument("data", help="returns CSV (header row, one row per day)")
    f.add_argument("--config", help="flat key = value config file")
    f.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    f.add_argument("--proxy", help="header-free N x N proxy covariance CSV")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    fc = sub.add_parser("forecast", help="predict Sigma_{T+h}, weights and discrepancies from a fit")
    fc.add_argument("fit", help="fit directory or posterior.npz")
    fc.add_argument("--horizon", type=int, choices=(1, 2), default=1)
    fc.add_argument("--proxy")
    fc.add_argument("--seed", type=int, default=0)
    fc.add_argument("--out", required=True)
    fc.set_defaults(func=cmd_forecast)

    pl = sub.add_parser("predlik", help="particle-filter predictive likelihoods for two fits")
    pl.add_argument("fit_a")
    pl.add_argument("fit_b")
    pl.add_argument("--future", required=True, help="returns CSV for r_{T+1:T+M}")
    pl.add_argument("--n-particles", type=int, default=10000)
    pl.add_argument("--variant", choices=("auxiliary", "bootstrap"), default="auxiliary")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_predlik)

    s = sub.add_parser("simulate", help="generate a synthetic returns panel")
    s.add_argument("--K", type=int, default=BUNDLE["K"])
    s.add_argument("--N", type=int)
    s.add_argument("--T", type=int, default=BUNDLE["T"])
    s.add_argument("--mode", choices=("basic", "factor"), default="basic")
    s.add_argument("--sigma2", type=float)
    s.add_argument("--missing", type=float, default=0.0)
    s.add_argument("--zero-angles", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--bundle", action="store_true", help="write the shipped synthetic dataset")
    s.add_argument("--truth", help="also save the true latent state (npz)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("diagnose", help="ESS table for a fit")
    d.add_argument("fit")
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, WeightCollapseError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

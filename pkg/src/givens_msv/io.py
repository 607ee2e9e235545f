"""File formats: returns panels, matrices, long-format panels, configs and saved fits."""

import csv
import json
from dataclasses import fields
from pathlib import Path
import types
import typing

import numpy as np

from .model import ModelConfig, PosteriorDraws, ReturnsPanel

__all__ = [
    "ConfigError",
    "DataError",
    "RUN_KEYS",
    "export_panel",
    "fmt",
    "ingest",
    "load_draws",
    "parse_config",
    "read_matrix_csv",
    "save_draws",
    "write_long_csv",
    "write_matrix_csv",
]

MANIFEST_VERSION = 1


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


def fmt(x):
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def ingest(path):
    """Read a returns CSV: header of asset names, one row per day.

    Empty cells and ``NaN`` mark missing values. Columns with no observations
    are rejected.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    names = [c.strip() for c in rows[0]]
    if not names or any(not n for n in names):
        raise DataError(f"{path}: header row must name every column")
    N = len(names)
    values = np.full((len(rows) - 1, N), np.nan)
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != N:
            raise DataError(f"{path}: line {lineno} has {len(row)} fields, expected {N}")
        for col, cell in enumerate(row):
            cell = cell.strip()
            if cell == "" or cell.lower() == "nan":
                continue
            try:
                values[lineno - 2, col] = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {lineno}, column {col + 1}: non-numeric cell {cell!r}") from None
            if not np.isfinite(values[lineno - 2, col]):
                raise DataError(f"{path}: line {lineno}, column {col + 1}: non-finite value")
    if values.shape[0] == 0:
        raise DataError(f"{path}: no data rows")
    empty = ~np.isfinite(values).any(axis=0)
    if empty.all():
        raise DataError(f"{path}: no usable columns")
    if empty.any():
        bad = [names[i] for i in np.flatnonzero(empty)]
        raise DataError(f"{path}: columns without observations: {', '.join(bad)}")
    return ReturnsPanel(values, names=names)


def export_panel(panel, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(panel.names)
        for t in range(panel.T):
            w.writerow(fmt(v) if o else "" for v, o in zip(panel.values[t], panel.observed[t]))


def write_matrix_csv(path, M):
    """Header-free dense matrix, full-precision decimals."""
    M = np.atleast_2d(M)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in M:
            w.writerow(fmt(v) for v in row)


def read_matrix_csv(path):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        M = np.array([[float(c) for c in r] for r in rows])
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    if M.ndim != 2:
        raise DataError(f"{path}: rows have unequal length")
    return M


def write_long_csv(path, panel, header=("day", "i", "j", "value"), upper=True, diagonal=True):
    """Write ``(T, K, K)`` matrices as ``day,i,j,value`` rows (upper triangle by default)."""
    T, K, _ = panel.shape
    skip = 0 if diagonal else 1
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in range(T):
            for i in range(K):
                for j in range(i + skip if upper else 0, K):
                    if not diagonal and i == j:
                        continue
                    w.writerow((t, i, j, fmt(panel[t, i, j])))


# run-level keys that sit next to the ModelConfig keys in a config file
RUN_KEYS = {
    "n_particles": int,
    "pf_variant": str,
    "holdout": int,
    "horizon": int,
    "emit_panels": bool,
    "chains": int,
}
RUN_DEFAULTS = {
    "n_particles": 10000,
    "pf_variant": "auxiliary",
    "holdout": 0,
    "horizon": 1,
    "emit_panels": True,
    "chains": 1,
}


def _field_type(tp):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return args[0], True
    return tp, False


def _coerce(key, raw, tp, optional):
    raw = raw.strip()
    if optional and raw.lower() in ("none", "null", ""):
        return None
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        return tp(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {tp.__name__}") from None


def parse_config(text="", overrides=()):
    """Parse flat ``key = value`` lines plus ``key=value`` overrides.

    Returns ``(ModelConfig, run_settings)``. Unknown keys are rejected.
    """
    types_ = {f.name: _field_type(f.type) for f in fields(ModelConfig)}
    types_.update({k: (v, False) for k, v in RUN_KEYS.items()})
    raw = {}
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            entries.append((f"line {lineno}", line))
    entries.extend(("override", o) for o in overrides)
    for where, item in entries:
        if "=" not in item:
            raise ConfigError(f"{where}: expected key = value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in types_:
            raise ConfigError(f"{where}: unknown config key {key!r}")
        raw[key] = value
    model_kw, run = {}, dict(RUN_DEFAULTS)
    for key, value in raw.items():
        tp, optional = types_[key]
        val = _coerce(key, value, tp, optional)
        if key in RUN_KEYS:
            run[key] = val
        else:
            model_kw[key] = val
    try:
        cfg = ModelConfig(**model_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if run["pf_variant"] not in ("auxiliary", "bootstrap"):
        raise ConfigError("pf_variant must be auxiliary or bootstrap")
    if run["horizon"] not in (1, 2):
        raise ConfigError("horizon must be 1 or 2")
    if run["n_particles"] < 1 or run["chains"] < 1 or run["holdout"] < 0:
        raise ConfigError("n_particles and chains must be >= 1, holdout >= 0")
    return cfg, run


_ARRAY_FIELDS = [
    "phi_tilde", "level", "sigma", "hyper", "B", "sigma2", "x_last", "f_last",
    "loglik", "sigma_last", "sigma_sum", "corr_sum", "f_mean",
]


def save_draws(path, draws, config=None):
    arrays = {k: getattr(draws, k) for k in _ARRAY_FIELDS}
    if draws.X is not None:
        arrays["X"] = draws.X
    meta = {
        "K": draws.K, "N": draws.N, "T": draws.T, "mode": draws.mode,
        "zero_angles": draws.zero_angles, "acceptance": draws.acceptance,
        "step_sizes": draws.step_sizes, "config": config or {},
    }
    np.savez_compressed(path, meta=np.array(json.dumps(meta)), **arrays)


def load_draws(path):
    """Inverse of :func:`save_draws`; returns ``(draws, config_dict)``."""
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            arrays = {k: z[k] for k in _ARRAY_FIELDS}
            X = z["X"] if "X" in z.files else None
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot load fit from {path}: {exc}") from exc
    draws = PosteriorDraws(
        K=meta["K"], N=meta["N"], T=meta["T"], mode=meta["mode"],
        zero_angles=meta["zero_angles"], X=X, acceptance=meta["acceptance"],
        step_sizes=meta["step_sizes"], **arrays,
    )
    return draws, meta["config"]

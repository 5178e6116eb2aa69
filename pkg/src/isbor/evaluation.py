"""Metrics, k-fold cross-validation over theta and the size-sweep experiment."""

from __future__ import annotations

import csv
import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import STREAM_FOLDS, Dataset, partition_indices, rng, standardize
from .errors import InputError
from .kernel import KernelCache
from .trainer import TrainConfig, fit, predict_many

log = logging.getLogger(__name__)

DEFAULT_GRID = (1e-2, 1e-1, 1.0, 10.0)
WIDE_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0)

REPORT_COLUMNS = ("size", "partition", "theta", "mae", "accuracy", "n_active",
                  "fit_seconds", "cache_seconds", "seed", "error")


def _labels(y_true, y_pred):
    a = np.asarray(y_true, dtype=float).ravel()
    b = np.asarray(y_pred, dtype=float).ravel()
    if a.size != b.size:
        raise InputError(f"length mismatch: {a.size} true vs {b.size} predicted labels")
    if a.size == 0:
        raise InputError("need at least one label")
    return a, b


def mae(y_true, y_pred) -> float:
    """Mean absolute error between ordinal labels."""
    a, b = _labels(y_true, y_pred)
    return float(np.abs(a - b).mean())


def accuracy(y_true, y_pred) -> float:
    a, b = _labels(y_true, y_pred)
    return float((a == b).mean())


def majority_mae(y_train, y_test) -> float:
    """MAE of always predicting the most frequent training category."""
    vals, counts = np.unique(np.asarray(y_train), return_counts=True)
    return mae(y_test, np.full(len(y_test), vals[np.argmax(counts)]))


@dataclass(frozen=True)
class EvalReport:
    mae: float
    accuracy: float
    n_active: int
    fit_seconds: float
    cache_seconds: float = 0.0
    theta: float = float("nan")
    size: int = 0
    partition: int = 0
    seed: int = 0
    error: str = ""
    config: dict = field(default_factory=dict, compare=False)

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in REPORT_COLUMNS}


def fit_timed(train: Dataset, cfg: TrainConfig, theta: float, standardize_x: bool = True):
    """Fit with a separately timed kernel-cache fill; returns (model, cache s, fit s)."""
    scaler = None
    if standardize_x:
        train, scaler = standardize(train)
    t0 = time.perf_counter()
    cache = KernelCache(train.X, theta)
    if train.n <= cfg.gram_limit:
        cache.gram()
        cache.gram_sq()
    t1 = time.perf_counter()
    model = fit(train, cfg, theta, cache=cache)
    t2 = time.perf_counter()
    if scaler is not None:
        model = replace(model, scaler=scaler)
    return model, t1 - t0, t2 - t1


def evaluate_model(model, test: Dataset) -> tuple:
    yp, _ = predict_many(model, test.X)
    return mae(test.Y, yp), accuracy(test.Y, yp)


@dataclass(frozen=True)
class CVResult:
    best_theta: float
    table: dict  # theta -> mean fold MAE
    fold_mae: dict  # theta -> list of per-fold MAE
    folds: tuple  # (train indices, validation indices) per fold
    skipped: tuple  # fold numbers left out for missing categories


def fold_indices(n: int, k: int, seed: int = 0):
    """Seeded k-fold split of range(n): list of (train, validation) index arrays."""
    if k < 2:
        raise InputError("need k >= 2 folds")
    if n < k:
        raise InputError(f"cannot split {n} rows into {k} folds")
    perm = rng(seed, STREAM_FOLDS).permutation(n)
    out = []
    for part in np.array_split(perm, k):
        val = np.sort(part)
        out.append((np.setdiff1d(np.arange(n), val), val))
    return out


def cross_validate(ds: Dataset, theta_grid=DEFAULT_GRID, k: int = 5, seed: int = 0,
                   cfg: TrainConfig | None = None, standardize_x: bool = True) -> CVResult:
    """k-fold CV of test MAE over a theta grid.

    Scaling is refit inside every fold on its training rows only. Ties in
    mean MAE go to the larger theta.
    """
    grid = [float(t) for t in theta_grid]
    if not grid:
        raise InputError("theta grid is empty")
    cfg = TrainConfig() if cfg is None else cfg
    folds = fold_indices(ds.n, k, seed)
    usable, skipped = [], []
    for f, (tr, va) in enumerate(folds):
        missing = ds.take(tr).missing_categories()
        if missing:
            warnings.warn(f"fold {f} skipped: training part lacks categories {missing}", RuntimeWarning)
            skipped.append(f)
        else:
            usable.append(f)
    if not usable:
        raise InputError("every fold lacks a category in its training part")
    fold_mae = {}
    for theta in grid:
        scores = []
        for f in usable:
            tr, va = folds[f]
            train, val = ds.take(tr), ds.take(va)
            model = fit(train, cfg, theta, standardize=standardize_x)
            scores.append(evaluate_model(model, val)[0])
        fold_mae[theta] = scores
        log.info("cv theta=%g mae=%.4f", theta, np.mean(scores))
    table = {t: float(np.mean(v)) for t, v in fold_mae.items()}
    best = min(grid, key=lambda t: (table[t], -t))
    return CVResult(best, table, fold_mae, tuple(folds), tuple(skipped))


@dataclass
class ExperimentSpec:
    sizes: tuple = (1000,)
    n_partitions: int = 1
    theta_grid: tuple = DEFAULT_GRID
    folds: int = 5
    seed: int = 0
    standardize: bool = True
    test_size: int | None = None  # rows kept for testing; default all remaining
    workers: int = 1


def _cell(ds: Dataset, size: int, part: int, tr, te, spec: ExperimentSpec, cfg: TrainConfig) -> EvalReport:
    snapshot = asdict(cfg)
    try:
        train, test = ds.take(tr), ds.take(te)
        if len(spec.theta_grid) == 1:
            theta = float(spec.theta_grid[0])
        else:
            theta = cross_validate(train, spec.theta_grid, spec.folds, spec.seed + part, cfg,
                                   spec.standardize).best_theta
        model, tc, tf = fit_timed(train, cfg, theta, spec.standardize)
        m, acc = evaluate_model(model, test)
        return EvalReport(m, acc, model.m, tf, tc, theta, size, part, spec.seed, config=snapshot)
    except Exception as exc:  # one failed cell must not sink the sweep
        log.warning("size %d partition %d failed: %s", size, part, exc)
        return EvalReport(float("nan"), float("nan"), 0, float("nan"), float("nan"), float("nan"),
                          size, part, spec.seed, error=f"{type(exc).__name__}: {exc}", config=snapshot)


def run_experiment(ds: Dataset, spec: ExperimentSpec, cfg: TrainConfig | None = None,
                   on_row=None) -> list:
    """Per size, per partition: CV for theta, fit, evaluate on the held-out rows."""
    cfg = TrainConfig() if cfg is None else cfg
    jobs = []
    for size in spec.sizes:
        if not 0 < size < ds.n:
            raise InputError(f"training size {size} must lie in (0, {ds.n})")
        for part, (tr, te) in enumerate(partition_indices(ds.n, size, spec.n_partitions, spec.seed)):
            if spec.test_size is not None:
                te = te[:spec.test_size]
            jobs.append((size, part, tr, te))
    rows = []
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            futures = [pool.submit(_cell, ds, s, p, tr, te, spec, cfg) for s, p, tr, te in jobs]
            for fut in futures:
                rows.append(fut.result())
                if on_row:
                    on_row(rows[-1])
    else:
        for s, p, tr, te in jobs:
            rows.append(_cell(ds, s, p, tr, te, spec, cfg))
            if on_row:
                on_row(rows[-1])
    return rows


def summarize(rows) -> list:
    """Mean/std over partitions for each training size (failed cells ignored)."""
    out = []
    for size in sorted({r.size for r in rows}):
        ok = [r for r in rows if r.size == size and not r.error]
        rec = {"size": size, "n_ok": len(ok), "n_failed": sum(1 for r in rows if r.size == size and r.error)}
        for key in ("mae", "accuracy", "n_active", "fit_seconds"):
            vals = np.array([getattr(r, key) for r in ok], dtype=float)
            rec[f"{key}_mean"] = float(vals.mean()) if vals.size else float("nan")
            rec[f"{key}_std"] = float(vals.std()) if vals.size else float("nan")
        out.append(rec)
    return out


def write_report(rows, path) -> None:
    """CSV, or JSON lines when the file name ends in .jsonl/.json."""
    path = Path(path)
    recs = [r.row() for r in rows]
    if path.suffix in (".jsonl", ".json"):
        with open(path, "w") as fh:
            for rec in recs:
                fh.write(json.dumps(rec) + "\n")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        w.writerows(recs)


def run_benchmark(ds: Dataset, n_train: int, n_partitions: int = 20, theta_grid=DEFAULT_GRID,
                  folds: int = 5, seed: int = 0, cfg: TrainConfig | None = None,
                  n_test: int | None = None, on_row=None) -> tuple:
    """Repeated random splits of a benchmark at one cross-validated theta.

    Theta is chosen once, by CV on the first partition's training rows, and
    reused for every partition. Returns (theta, rows).
    """
    cfg = TrainConfig() if cfg is None else cfg
    (tr, _), = partition_indices(ds.n, n_train, 1, seed)
    theta = float(theta_grid[0]) if len(theta_grid) == 1 else \
        cross_validate(ds.take(tr), theta_grid, folds, seed, cfg).best_theta
    spec = ExperimentSpec(sizes=(n_train,), n_partitions=n_partitions, theta_grid=(theta,),
                          folds=folds, seed=seed, test_size=n_test)
    return theta, run_experiment(ds, spec, cfg, on_row)

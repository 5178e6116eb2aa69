"""Command-line interface: train, predict, evaluate, synth, cv, experiment."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import logging
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import persist
from .data import generate_synthetic, load_csv, read_features, write_csv
from .errors import ConvergenceError, InputError, NumericError, ParseError
from .evaluation import (DEFAULT_GRID, WIDE_GRID, ExperimentSpec, accuracy, cross_validate, mae,
                         run_experiment, summarize, write_report)
from .trainer import TrainConfig, fit, predict_many, predict_proba

ERRORS = (InputError, ParseError, NumericError, ConvergenceError, OSError)


def _fail(exc) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _grid(text: str | None, wide: bool = False):
    if text is None:
        return WIDE_GRID if wide else DEFAULT_GRID
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise click.BadParameter(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise click.BadParameter("theta values must be positive")
    return vals


@click.group()
@click.option("-v", "--verbose", count=True, help="Log progress to stderr (-vv for per-iteration detail).")
def main(verbose):
    """Incremental sparse Bayesian ordinal regression."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--data", required=True, type=click.Path(dir_okay=False), help="Training CSV (label last).")
@click.option("--theta", type=float, help="RBF width.")
@click.option("--cv", "use_cv", is_flag=True, help="Pick theta by 5-fold CV instead of --theta.")
@click.option("--grid", help="Comma-separated theta grid for --cv.")
@click.option("--folds", default=5, show_default=True)
@click.option("--max-its", default=500, show_default=True)
@click.option("--min-delta", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Model file to write.")
@click.option("--no-standardize", is_flag=True, help="Use raw features in the kernel.")
@click.option("--no-reestimate", is_flag=True, help="Only add and delete bases.")
def train(data, theta, use_cv, grid, folds, max_its, min_delta, seed, out, no_standardize, no_reestimate):
    """Fit a model and write it to --out."""
    if (theta is None) == (not use_cv):
        raise click.UsageError("give exactly one of --theta or --cv")
    if theta is not None and not theta > 0:
        raise click.BadParameter("--theta must be positive")
    try:
        ds = load_csv(data)
        cfg = TrainConfig(max_its=max_its, min_delta=min_delta, seed=seed,
                          enable_reestimate=not no_reestimate)
        t0 = time.perf_counter()
        if use_cv:
            res = cross_validate(ds, _grid(grid), folds, seed, cfg, not no_standardize)
            theta = res.best_theta
        model = fit(ds, cfg, theta, standardize=not no_standardize)
        elapsed = time.perf_counter() - t0
        persist.save(model, out)
    except ERRORS as exc:
        _fail(exc)
    cuts = " ".join(f"{v:.6g}" for v in model.b.cutpoints())
    click.echo(f"N={ds.n} M={model.m} theta={theta:g} log_marginal={model.log_marginal_history[-1]:.6f} "
               f"sigma={model.sigma:.6g} b=[{cuts}] converged={model.converged} "
               f"iterations={model.n_iter} seconds={elapsed:.2f}")


def _true_categories(model, raw):
    if model.label_values is None:
        return raw
    lookup = {v: k + 1 for k, v in enumerate(model.label_values)}
    try:
        return np.array([lookup[int(v)] for v in raw])
    except KeyError as exc:
        raise InputError(f"label {exc.args[0]} was not seen in training") from None


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", required=True, type=click.Path(dir_okay=False),
              help="CSV of features, optionally with a trailing label column.")
@click.option("--out", type=click.Path(dir_okay=False), help="Predictions CSV (default: stdout).")
@click.option("--proba", is_flag=True, help="Append one probability column per category.")
def predict(model_path, data, out, proba):
    """Predict categories and latent scores for each input row."""
    try:
        model = persist.load(model_path)
        X, raw = read_features(data, model.d)
        cats, f = predict_many(model, X)
        probs = predict_proba(model, X) if proba else None
        truth = _true_categories(model, raw) if raw is not None else None
    except ERRORS as exc:
        _fail(exc)
    labels = cats if model.label_values is None else np.asarray(model.label_values)[cats - 1]
    header = ["label", "score"] + ([f"p{k}" for k in range(1, model.r + 1)] if proba else [])
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(len(cats)):
            row = [int(labels[k]), repr(float(f[k]))]
            if proba:
                row += [repr(float(p)) for p in probs[k]]
            w.writerow(row)
    finally:
        if out:
            fh.close()
    if truth is not None:
        click.echo(f"mae={mae(truth, cats):.6f} accuracy={accuracy(truth, cats):.6f} n={len(cats)}",
                   err=out is None)


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", required=True, type=click.Path(dir_okay=False), help="Labelled CSV.")
def evaluate(model_path, data):
    """Print MAE and accuracy of a saved model on a labelled file."""
    try:
        model = persist.load(model_path)
        X, raw = read_features(data, model.d)
        if raw is None:
            raise InputError(f"{data}: no label column to evaluate against")
        truth = _true_categories(model, raw)
        cats, _ = predict_many(model, X)
    except ERRORS as exc:
        _fail(exc)
    click.echo(f"mae={mae(truth, cats):.6f} accuracy={accuracy(truth, cats):.6f} n={len(cats)} M={model.m}")


@main.command()
@click.option("--n", "n_total", required=True, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--center", default=5.0, show_default=True, help="Saddle centre c in 10(x1-c)(x2-c).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def synth(n_total, seed, center, out):
    """Write the synthetic five-class saddle dataset as CSV."""
    try:
        write_csv(out, generate_synthetic(n_total, seed, center))
    except ERRORS as exc:
        _fail(exc)


@main.command()
@click.option("--data", required=True, type=click.Path(dir_okay=False))
@click.option("--grid", help="Comma-separated theta values.")
@click.option("--wide", is_flag=True, help="Use the 1e-3..1e3 grid when --grid is absent.")
@click.option("--folds", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--no-standardize", is_flag=True)
def cv(data, grid, wide, folds, seed, no_standardize):
    """Cross-validate theta and print mean fold MAE per value."""
    try:
        ds = load_csv(data)
        res = cross_validate(ds, _grid(grid, wide), folds, seed, TrainConfig(seed=seed), not no_standardize)
    except ERRORS as exc:
        _fail(exc)
    click.echo("theta,mean_mae,folds")
    for theta, v in res.table.items():
        click.echo(f"{theta:g},{v:.6f},{len(res.fold_mae[theta])}")
    click.echo(f"best_theta={res.best_theta:g}")


_SPEC_KEYS = {f.name for f in dataclasses.fields(ExperimentSpec)}
_CFG_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def _coerce(name, text, kind):
    text = text.strip()
    try:
        if kind in (bool, "bool"):
            low = text.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(text)
            return low in ("1", "true", "yes", "on")
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            return float(text)
    except ValueError:
        raise ParseError(f"bad value {text!r} for {name}") from None
    return text


def read_config(path) -> dict:
    """Flat ``key = value`` file; a leading section header is optional."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(exc), location=str(path)) from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if not text.lstrip().startswith("["):
            text = "[experiment]\n" + text
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], location=str(path)) from None
    out = {}
    for section in parser.sections():
        out.update(parser[section])
    return out


def build_experiment(conf: dict, overrides: dict):
    """Merge config-file values with flag overrides into (data source, spec, cfg, out)."""
    merged = {k.replace("-", "_"): v for k, v in conf.items()}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    spec_kw, cfg_kw = {}, {}
    for key, val in merged.items():
        if key in ("data", "out", "synthetic_n", "synthetic_seed", "summary"):
            continue
        if key == "sizes":
            spec_kw["sizes"] = tuple(int(v) for v in str(val).split(",") if v.strip()) if isinstance(val, str) else tuple(val)
        elif key in ("grid", "theta_grid"):
            spec_kw["theta_grid"] = _grid(val) if isinstance(val, str) else tuple(val)
        elif key in ("partitions", "n_partitions"):
            spec_kw["n_partitions"] = _coerce(key, str(val), int)
        elif key in ("folds", "workers", "seed"):
            spec_kw[key] = _coerce(key, str(val), int)
            if key == "seed":
                cfg_kw["seed"] = spec_kw["seed"]
        elif key == "test_size":
            spec_kw[key] = _coerce(key, str(val), int)
        elif key == "standardize":
            spec_kw[key] = _coerce(key, str(val), bool)
        elif key in _CFG_FIELDS:
            cfg_kw[key] = _coerce(key, str(val), _CFG_FIELDS[key].type)
        else:
            raise ParseError(f"unknown config key {key!r}")
    data = merged.get("data", "synthetic")
    return data, merged, ExperimentSpec(**spec_kw), TrainConfig(**cfg_kw)


@main.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key = value settings file.")
@click.option("--data", help="Dataset CSV, or 'synthetic'.")
@click.option("--sizes", help="Comma-separated training sizes.")
@click.option("--partitions", type=int)
@click.option("--grid", help="Comma-separated theta grid (one value skips CV).")
@click.option("--folds", type=int)
@click.option("--seed", type=int)
@click.option("--workers", type=int)
@click.option("--test-size", type=int, help="Cap on test rows per partition.")
@click.option("--max-its", type=int)
@click.option("--min-delta", type=float)
@click.option("--out", type=click.Path(dir_okay=False), help="Report file (.csv or .jsonl).")
def experiment(config_path, out, **flags):
    """Size sweep: per size and partition, CV theta, fit, evaluate."""
    try:
        conf = read_config(config_path) if config_path else {}
        flags["out"] = out
        data, merged, spec, cfg = build_experiment(conf, flags)
        out = merged.get("out")
        if str(data).lower() == "synthetic":
            n = int(merged.get("synthetic_n", 21000))
            ds = generate_synthetic(n, int(merged.get("synthetic_seed", spec.seed)))
        else:
            if not Path(data).is_file():
                raise InputError(f"dataset not found: {data}")
            ds = load_csv(data)

        def show(r):
            status = r.error or f"mae={r.mae:.4f} acc={r.accuracy:.4f} M={r.n_active} fit={r.fit_seconds:.2f}s"
            click.echo(f"size={r.size} partition={r.partition} theta={r.theta:g} {status}", err=True)

        rows = run_experiment(ds, spec, cfg, on_row=show)
        if out:
            write_report(rows, out)
    except ERRORS as exc:
        _fail(exc)
    click.echo("size,n_ok,mae_mean,mae_std,accuracy_mean,n_active_mean,fit_seconds_mean")
    for s in summarize(rows):
        click.echo(f"{s['size']},{s['n_ok']},{s['mae_mean']:.6f},{s['mae_std']:.6f},"
                   f"{s['accuracy_mean']:.6f},{s['n_active_mean']:.2f},{s['fit_seconds_mean']:.3f}")
    if any(r.error for r in rows):
        sys.exit(1)


if __name__ == "__main__":
    main()

"""Datasets: loading, scaling, partitioning and the synthetic saddle problem.

Random streams
--------------
Every random draw comes from ``rng(seed, stream)``, a PCG64 generator seeded
by ``SeedSequence(seed, spawn_key=(stream,))``. Distinct streams of the same
seed are statistically independent, so the synthetic generator, the
partitioner, trainer initialization and CV fold assignment never share draws.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError

STREAM_SYNTH = 0
STREAM_PARTITION = 1
STREAM_INIT = 2
STREAM_FOLDS = 3

SYNTH_EDGES = (-60.0, -9.0, 15.0, 60.0)
SYNTH_NOISE = 0.5


def rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    r: int
    names: tuple | None = None
    label_values: tuple | None = None  # original label for each category 1..r

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=int).ravel()
        if X.ndim != 2 or X.shape[0] != Y.size:
            raise InputError(f"X has shape {X.shape} but there are {Y.size} labels")
        if not np.all(np.isfinite(X)):
            raise InputError("features contain non-finite values")
        if Y.size and (Y.min() < 1 or Y.max() > self.r):
            raise InputError(f"labels must lie in 1..{self.r}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return replace(self, X=self.X[idx], Y=self.Y[idx])

    def missing_categories(self) -> list:
        present = set(np.unique(self.Y).tolist())
        return [k for k in range(1, self.r + 1) if k not in present]


def synthetic_scores(X, center: float = 5.0) -> np.ndarray:
    """Noise-free saddle 10 (x1 - c)(x2 - c)."""
    X = np.asarray(X, dtype=float)
    return 10.0 * (X[:, 0] - center) * (X[:, 1] - center)


def label_scores(scores, edges=SYNTH_EDGES) -> np.ndarray:
    return np.searchsorted(np.asarray(edges), scores, side="left") + 1


def generate_synthetic(n_total: int, seed: int = 0, center: float = 5.0) -> Dataset:
    """Uniform points on [0, 10]^2 labelled by a noisy saddle.

    Scores 10 (x1 - c)(x2 - c) + N(0, 0.5^2) are cut at -60, -9, 15, 60 into
    five classes. The default c = 5 centres the saddle in the square.
    """
    if n_total < 1:
        raise InputError("n_total must be positive")
    g = rng(seed, STREAM_SYNTH)
    X = g.uniform(0.0, 10.0, size=(n_total, 2))
    s = synthetic_scores(X, center) + g.normal(0.0, SYNTH_NOISE, size=n_total)
    return Dataset(X, label_scores(s), 5, names=("x1", "x2"))


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def parse_rows(rows, source="<data>", header=None):
    """Turn text rows into (features, raw labels, names).

    ``header=None`` treats the first row as a header when any of its cells is
    non-numeric.
    """
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty file", location=source)
    names = None
    first = [c.strip() for c in rows[0]]
    if header is None:
        header = not all(_is_number(c) for c in first)
    start = 1 if header else 0
    if header:
        names = tuple(first[:-1])
    body = rows[start:]
    if not body:
        raise ParseError("no data rows", location=source)
    width = len(first)
    if width < 2:
        raise ParseError("need at least one feature and a label column", location=f"{source}, row 1")
    feats = np.empty((len(body), width - 1))
    labels = np.empty(len(body), dtype=int)
    for k, row in enumerate(body):
        lineno = k + start + 1
        cells = [c.strip() for c in row]
        if len(cells) != width:
            raise ParseError(f"expected {width} fields, found {len(cells)}", location=f"{source}, row {lineno}")
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_number(c))
            raise ParseError(f"non-numeric cell {bad!r}", location=f"{source}, row {lineno}") from None
        if not all(np.isfinite(vals)):
            raise ParseError("non-finite value", location=f"{source}, row {lineno}")
        lab = vals[-1]
        if lab != int(lab):
            raise ParseError(f"label {lab} is not an integer", location=f"{source}, row {lineno}")
        feats[k] = vals[:-1]
        labels[k] = int(lab)
    return feats, labels, names


def remap_labels(raw):
    """Map sorted distinct labels onto 1..r; returns (mapped, original values)."""
    values = np.unique(raw)
    mapped = np.searchsorted(values, raw) + 1
    return mapped, tuple(int(v) for v in values)


def load_csv(path, header=None) -> Dataset:
    """Comma-separated numeric features with an integer label in the last column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(exc), location=str(path)) from None
    feats, raw, names = parse_rows(list(csv.reader(io.StringIO(text))), str(path), header)
    Y, values = remap_labels(raw)
    return Dataset(feats, Y, len(values), names=names, label_values=values)


def load_table(path) -> Dataset:
    """Whitespace-separated numeric table with the label last (ORCA partition files)."""
    path = Path(path)
    try:
        rows = [line.split() for line in path.read_text().splitlines()]
    except OSError as exc:
        raise ParseError(str(exc), location=str(path)) from None
    feats, raw, names = parse_rows(rows, str(path), header=False)
    Y, values = remap_labels(raw)
    return Dataset(feats, Y, len(values), names=names, label_values=values)


def read_features(path, d: int):
    """Rows of a prediction input: d feature columns, optionally a trailing label.

    Returns (X, raw labels or None).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(exc), location=str(path)) from None
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty file", location=str(path))
    start = 0 if all(_is_number(c) for c in rows[0]) else 1
    width = len(rows[start]) if start < len(rows) else 0
    if width not in (d, d + 1):
        raise InputError(f"{path}: expected {d} feature columns (optionally plus a label), found {width}")
    out = np.empty((len(rows) - start, width))
    for k, row in enumerate(rows[start:]):
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", location=f"{path}, row {k + start + 1}")
        try:
            out[k] = [float(c) for c in row]
        except ValueError:
            raise ParseError("non-numeric cell", location=f"{path}, row {k + start + 1}") from None
    if width == d + 1:
        return out[:, :d], out[:, d].astype(int)
    return out, None


def write_csv(path, ds: Dataset) -> None:
    labels = ds.Y if ds.label_values is None else np.asarray(ds.label_values)[ds.Y - 1]
    names = ds.names or tuple(f"x{k + 1}" for k in range(ds.d))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*names, "y"])
        for row, lab in zip(ds.X, labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    scale: np.ndarray  # 1 for zero-variance features

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "scale": [float(v) for v in self.scale]}

    @classmethod
    def from_dict(cls, d) -> "Scaler":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


def fit_scaler(X) -> Scaler:
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise InputError("cannot standardize an empty dataset")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return Scaler(mean, scale)


def standardize(train: Dataset):
    sc = fit_scaler(train.X)
    return apply_scaler(sc, train), sc


def apply_scaler(scaler: Scaler, ds: Dataset) -> Dataset:
    return replace(ds, X=scaler.transform(ds.X))


def partition(ds: Dataset, train_size: int, n_partitions: int, seed: int = 0):
    """Seeded random train/test splits; returns a list of (train, test) datasets."""
    return [(ds.take(tr), ds.take(te)) for tr, te in partition_indices(ds.n, train_size, n_partitions, seed)]


def partition_indices(n: int, train_size: int, n_partitions: int, seed: int = 0):
    if not 0 < train_size < n:
        raise InputError(f"train_size must be in (0, {n}), got {train_size}")
    g = rng(seed, STREAM_PARTITION)
    splits = []
    for _ in range(n_partitions):
        perm = g.permutation(n)
        splits.append((np.sort(perm[:train_size]), np.sort(perm[train_size:])))
    return splits


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    n: int
    d: int
    r: int
    n_train: int = 0
    n_test: int = 0


def load_manifest(path=None) -> dict:
    """Benchmark manifest: CSV with columns name, n, d, r, n_train, n_test."""
    if path is None:
        text = resources.files("isbor").joinpath("benchmarks.csv").read_text()
        source = "benchmarks.csv"
    else:
        text = Path(path).read_text()
        source = str(path)
    out = {}
    reader = csv.DictReader(io.StringIO(text))
    for k, rec in enumerate(reader, start=2):
        try:
            spec = BenchmarkSpec(rec["name"].strip(), int(rec["n"]), int(rec["d"]), int(rec["r"]),
                                 int(rec.get("n_train") or 0), int(rec.get("n_test") or 0))
        except (KeyError, ValueError, AttributeError) as exc:
            raise ParseError(f"bad manifest record: {exc}", location=f"{source}, row {k}") from None
        out[spec.name.lower()] = spec
    return out


def validate_benchmark(name: str, ds: Dataset, manifest=None) -> BenchmarkSpec:
    manifest = load_manifest() if manifest is None else manifest
    spec = manifest.get(name.lower())
    if spec is None:
        raise InputError(f"unknown benchmark {name!r}; known: {sorted(manifest)}")
    if ds.d != spec.d or ds.r != spec.r:
        raise InputError(f"{name}: expected d={spec.d}, r={spec.r}; got d={ds.d}, r={ds.r}")
    if ds.n not in (spec.n, spec.n_train, spec.n_test):
        raise InputError(f"{name}: expected N={spec.n}, got {ds.n}")
    return spec


BENCHMARK_ENV = "ISBOR_BENCHMARK_DIR"


def find_benchmark(name: str, directory=None) -> Path | None:
    """Path of ``<name>.csv`` (or .txt/.data, any case) in ``directory``, else None.

    ``directory`` defaults to the ISBOR_BENCHMARK_DIR environment variable.
    """
    directory = directory if directory is not None else os.environ.get(BENCHMARK_ENV)
    if not directory or not Path(directory).is_dir():
        return None
    for p in sorted(Path(directory).iterdir()):
        if p.stem.lower() == name.lower() and p.suffix.lower() in (".csv", ".txt", ".data"):
            return p
    return None


def load_benchmark(name: str, directory=None) -> Dataset:
    """Load a user-downloaded benchmark and check it against the manifest."""
    path = find_benchmark(name, directory)
    if path is None:
        raise InputError(f"benchmark {name!r} not found (set {BENCHMARK_ENV} to its directory)")
    ds = load_csv(path) if path.suffix.lower() == ".csv" else load_table(path)
    validate_benchmark(name, ds)
    return ds

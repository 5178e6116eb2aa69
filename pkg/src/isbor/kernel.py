"""Gaussian RBF basis functions and a lazily filled Gram-column cache."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import InputError


def rbf(x, z, theta: float) -> float:
    """exp(-theta * ||x - z||^2) for two feature vectors."""
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if x.shape != z.shape:
        raise InputError(f"dimension mismatch: {x.shape[0]} vs {z.shape[0]}")
    diff = x - z
    return float(np.exp(-theta * np.dot(diff, diff)))


def sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, rows of A against rows of B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise InputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    sa = np.einsum("ij,ij->i", A, A)
    sb = np.einsum("ij,ij->i", B, B)
    d = sa[:, None] + sb[None, :] - 2.0 * (A @ B.T)
    np.maximum(d, 0.0, out=d)
    return d


def rbf_matrix(A: np.ndarray, B: np.ndarray, theta: float) -> np.ndarray:
    """Basis values exp(-theta * ||a_i - b_j||^2) as a len(A) x len(B) matrix."""
    return np.exp(-theta * sq_distances(A, B))


@dataclass(frozen=True)
class DesignMatrix:
    """Basis columns restricted to an active set of training samples."""

    columns: np.ndarray
    column_index: tuple
    n: int

    @property
    def m(self) -> int:
        return len(self.column_index)


class KernelCache:
    """Gram columns over a fixed training set, computed on first use.

    Columns are cached individually keyed by sample index. ``gram()``
    materializes the full N x N matrix (the candidate scan of small and
    medium problems wants every column each iteration); once it exists all
    lookups are served from it. ``block`` computes a run of columns without
    caching them, for scans over training sets too large to hold.
    """

    def __init__(self, X, theta: float):
        self.X = np.ascontiguousarray(X, dtype=float)
        if self.X.ndim != 2:
            raise InputError("X must be a 2-D array")
        self.theta = float(theta)
        self.n = self.X.shape[0]
        self._sqnorm = np.einsum("ij,ij->i", self.X, self.X)
        self._cols: dict[int, np.ndarray] = {}
        self._gram = None
        self._gram_sq = None
        self._lock = threading.Lock()

    def _compute(self, idx: np.ndarray) -> np.ndarray:
        cross = self.X @ self.X[idx].T
        d = self._sqnorm[:, None] + self._sqnorm[idx][None, :] - 2.0 * cross
        np.maximum(d, 0.0, out=d)
        d[idx, np.arange(len(idx))] = 0.0
        return np.exp(-self.theta * d)

    def _check(self, j: int) -> int:
        if not 0 <= j < self.n:
            raise InputError(f"column index {j} out of range [0, {self.n})")
        return int(j)

    def column(self, j: int) -> np.ndarray:
        return self.columns([j])[:, 0]

    def columns(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=int).ravel()
        if idx.size == 0:
            return np.empty((self.n, 0))
        for j in idx:
            self._check(j)
        if self._gram is not None:
            return self._gram[:, idx]
        with self._lock:
            missing = np.array(sorted({int(j) for j in idx} - self._cols.keys()), dtype=int)
            if missing.size:
                block = self._compute(missing)
                for k, j in enumerate(missing):
                    self._cols[int(j)] = block[:, k].copy()
            return np.column_stack([self._cols[int(j)] for j in idx])

    def block(self, start: int, stop: int) -> np.ndarray:
        """Columns start..stop-1, computed fresh and not retained."""
        if self._gram is not None:
            return self._gram[:, start:stop]
        return self._compute(np.arange(start, min(stop, self.n)))

    def gram(self) -> np.ndarray:
        """The full N x N Gram matrix (built once, returned by reference)."""
        if self._gram is None:
            with self._lock:
                if self._gram is None:
                    g = np.empty((self.n, self.n))
                    # blocks bound the N x block temporaries
                    for start in range(0, self.n, 1024):
                        stop = min(start + 1024, self.n)
                        g[:, start:stop] = self._compute(np.arange(start, stop))
                    self._gram = g
                    self._cols.clear()
        return self._gram

    def gram_sq(self) -> np.ndarray:
        """Elementwise square of the full Gram matrix."""
        if self._gram_sq is None:
            g = self.gram()
            with self._lock:
                if self._gram_sq is None:
                    self._gram_sq = g * g
        return self._gram_sq

    @property
    def is_full(self) -> bool:
        return self._gram is not None

    @property
    def n_cached(self) -> int:
        return self.n if self._gram is not None else len(self._cols)


def design_column(X, j: int, theta: float, cache: KernelCache | None = None) -> np.ndarray:
    """Column j of the basis matrix: rbf(x_n, x_j) for every training row n."""
    if cache is None:
        cache = KernelCache(X, theta)
    return cache.column(j)


def active_design(X, active_indices, theta: float, cache: KernelCache | None = None) -> DesignMatrix:
    X = np.asarray(X, dtype=float)
    idx = [int(i) for i in active_indices]
    if len(set(idx)) != len(idx):
        raise InputError(f"duplicate active index in {idx}")
    if cache is None:
        cache = KernelCache(X, theta)
    cols = np.array(cache.columns(idx)) if idx else np.empty((X.shape[0], 0))
    return DesignMatrix(columns=cols, column_index=tuple(idx), n=X.shape[0])

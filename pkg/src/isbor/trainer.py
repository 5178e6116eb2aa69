"""Incremental training loop, prediction and the fitted-model container."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import STREAM_INIT, Dataset, Scaler, rng, standardize as _standardize
from .errors import ConvergenceError, InputError
from .hyper import update_noise, update_thresholds
from .kernel import KernelCache, rbf_matrix
from .likelihood import Thresholds, normal_cdf
from .posterior import PosteriorState, map_estimate
from .selection import Move, concat_tables, ranked_actions, scan

log = logging.getLogger(__name__)

SCAN_BLOCK = 2048


@dataclass(frozen=True)
class TrainConfig:
    max_its: int = 500
    min_delta: float = 1e-3
    seed: int = 0
    alpha_init: float = 1e-3
    sigma_init: float = 1.0
    alpha_prune: float = 1e12
    w_zero_tol: float = 1e-3
    enable_reestimate: bool = True
    learn_thresholds: bool = True
    learn_noise: bool = True
    max_thresh_steps: int = 10
    move_tries: int = 10
    # above this many training rows the scan streams Gram blocks instead of
    # holding the N x N matrix (and its square) in memory
    gram_limit: int = 12000

    def __post_init__(self):
        if self.max_its < 1:
            raise InputError("max_its must be at least 1")
        if not self.min_delta > 0:
            raise InputError("min_delta must be positive")
        for name in ("alpha_init", "sigma_init", "alpha_prune", "w_zero_tol"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")


@dataclass(frozen=True)
class ModelState:
    active: np.ndarray
    w: np.ndarray
    alpha: np.ndarray
    Sigma: np.ndarray
    b: Thresholds
    sigma: float
    theta: float
    active_points: np.ndarray
    log_marginal_history: tuple = ()
    converged: bool = True
    n_iter: int = 0
    scaler: Scaler | None = None
    label_values: tuple | None = None
    moves: tuple = field(default=(), compare=False)
    stop_reason: str = ""  # "min_delta", "no_move" or "max_its"

    @property
    def m(self) -> int:
        return self.active.size

    @property
    def r(self) -> int:
        return self.b.r

    @property
    def d(self) -> int:
        return self.active_points.shape[1]


class _Run:
    """Mutable working state of one fit."""

    def __init__(self, ds: Dataset, cfg: TrainConfig, theta: float, cache: KernelCache):
        self.ds, self.cfg, self.theta, self.cache = ds, cfg, float(theta), cache
        self.active: list[int] = []
        self.alpha = np.empty(0)
        self.w = np.empty(0)
        self.b = Thresholds.initial(ds.r)
        self.sigma = float(cfg.sigma_init)
        self.excluded: set[int] = set()
        self.post: PosteriorState | None = None
        self._phi_key = None
        self._phi = None

    def phi(self) -> np.ndarray:
        key = tuple(self.active)
        if key != self._phi_key:
            self._phi = np.ascontiguousarray(self.cache.columns(self.active))
            self._phi_key = key
        return self._phi

    def refit(self) -> PosteriorState:
        try:
            post = map_estimate(self.phi(), self.ds.Y, self.alpha, self.b, self.sigma, self.w)
        except ConvergenceError as exc:
            warnings.warn(str(exc), RuntimeWarning)
            post = exc.state
        self.post = post
        self.w = post.w_star.copy()
        return post

    def remove(self, pos: int) -> None:
        del self.active[pos]
        self.alpha = np.delete(self.alpha, pos)
        self.w = np.delete(self.w, pos)

    def prune(self, keep=-1) -> bool:
        """Drop bases with huge precision or negligible weight (never all of them)."""
        cfg = self.cfg
        doomed = [k for k, j in enumerate(self.active)
                  if j != keep and (self.alpha[k] > cfg.alpha_prune or abs(self.w[k]) < cfg.w_zero_tol)]
        if len(doomed) >= len(self.active):
            doomed = sorted(doomed, key=lambda k: abs(self.w[k]))[:len(self.active) - 1]
        for k in sorted(doomed, reverse=True):
            self.excluded.add(self.active[k])
            self.remove(k)
        return bool(doomed)


def _scan_all(run: _Run):
    n = run.ds.n
    kw = dict(excluded=run.excluded, enable_reestimate=run.cfg.enable_reestimate)
    if n <= run.cfg.gram_limit:
        return scan(run.cache.gram(), np.arange(n), run.phi(), run.post, run.alpha, run.active,
                    cols_sq=run.cache.gram_sq(), **kw)
    tables = []
    for start in range(0, n, SCAN_BLOCK):
        cols = run.cache.block(start, start + SCAN_BLOCK)
        idx = np.arange(start, start + cols.shape[1])
        tables.append(scan(cols, idx, run.phi(), run.post, run.alpha, run.active, **kw))
    return concat_tables(tables)


def _check_categories(ds: Dataset) -> None:
    missing = ds.missing_categories()
    if missing:
        raise InputError(f"categories absent from training data: {missing}")


def _init_run(ds: Dataset, cfg: TrainConfig, theta: float, cache=None) -> _Run:
    _check_categories(ds)
    if cache is None:
        cache = KernelCache(ds.X, theta)
    run = _Run(ds, cfg, theta, cache)
    g = rng(cfg.seed, STREAM_INIT)
    run.active = [int(g.choice(np.flatnonzero(ds.Y == k))) for k in range(1, ds.r + 1)]
    run.alpha = np.full(ds.r, float(cfg.alpha_init))
    run.w = np.zeros(ds.r)
    run.refit()
    return run


def _snapshot(run: _Run, history, converged, n_iter, moves, stop_reason="") -> ModelState:
    post = run.post
    idx = np.asarray(run.active, dtype=int)
    return ModelState(
        active=idx,
        w=post.w_star.copy(),
        alpha=run.alpha.copy(),
        Sigma=post.sigma_post.copy(),
        b=run.b,
        sigma=run.sigma,
        theta=run.theta,
        active_points=run.ds.X[idx].copy(),
        log_marginal_history=tuple(history),
        converged=converged,
        n_iter=n_iter,
        label_values=run.ds.label_values,
        moves=tuple(moves),
        stop_reason=stop_reason,
    )


def initialize(ds: Dataset, cfg: TrainConfig, theta: float, cache=None) -> ModelState:
    """One random sample per category as the starting basis set, MAP-fitted."""
    run = _init_run(ds, cfg, theta, cache)
    return _snapshot(run, [run.post.log_marginal], False, 0, [])


def _apply(run: _Run, action) -> None:
    j = action.index
    if action.move is Move.ADD:
        run.active.append(j)
        run.alpha = np.append(run.alpha, action.alpha)
        run.w = np.append(run.w, 0.0)
    elif action.move is Move.DELETE:
        run.remove(run.active.index(j))
    else:
        run.alpha[run.active.index(j)] = action.alpha


def fit(ds: Dataset, cfg: TrainConfig | None = None, theta: float = 1.0,
        cache: KernelCache | None = None, standardize: bool = False) -> ModelState:
    """Grow a sparse basis set by greedy evidence maximization.

    Each outer iteration scans every training sample and applies the add /
    delete / re-estimate move with the largest predicted evidence gain. The
    MAP weights are refitted; if the Laplace evidence dropped, the move is
    undone and the next-ranked move is tried (up to ``cfg.move_tries``).
    Then the cut-points are ascended, the noise level refreshed and dead
    bases pruned. Stops when the evidence changes by less than
    ``cfg.min_delta`` or no move improves it.

    With ``standardize`` the features are scaled to zero mean and unit
    variance first and the scaler is stored on the model; a supplied
    ``cache`` must then be built on the scaled features.
    """
    cfg = TrainConfig() if cfg is None else cfg
    if standardize:
        ds, scaler = _standardize(ds)
        return replace(fit(ds, cfg, theta, cache), scaler=scaler)
    if cache is not None and (cache.n != ds.n or cache.theta != float(theta)):
        raise InputError("kernel cache does not match the dataset/theta")
    if cache is None:
        cache = KernelCache(ds.X, theta)
    if ds.n <= cfg.gram_limit:
        # build the Gram before the first fit so every column comes from the
        # same blocked computation whether or not the caller warmed the cache
        cache.gram()
    run = _init_run(ds, cfg, theta, cache)
    ml_old = run.post.log_marginal
    history = [ml_old]
    moves = []
    converged = False
    reason = "max_its"
    Y = ds.Y
    it = 0
    for it in range(1, cfg.max_its + 1):
        table = _scan_all(run)
        ml_cur = run.post.log_marginal
        action = None
        for cand in ranked_actions(table, cfg.move_tries):
            saved = (list(run.active), run.alpha.copy(), run.w.copy(), run.post)
            _apply(run, cand)
            post = run.refit()
            if post.log_marginal >= ml_cur - 1e-10 * abs(ml_cur):
                action = cand
                break
            run.active, run.alpha, run.w, run.post = saved
        if action is None:
            converged, reason = True, "no_move"
            it -= 1
            break
        j = action.index
        moves.append((action.move.value, j))

        if cfg.learn_thresholds:
            nb = update_thresholds(post.scores, Y, run.b, run.sigma, max_steps=cfg.max_thresh_steps)
            if nb is not run.b:
                run.b = nb
                post = run.refit()
        ml = post.log_marginal
        if cfg.learn_noise:
            run.sigma = update_noise(post.t_hat, run.phi(), post.w_star, run.alpha,
                                     np.diag(post.sigma_post), run.sigma)
            run.refit()
        if run.prune(keep=j if action.move is not Move.DELETE else -1):
            run.refit()
        history.append(ml)
        log.debug("it %d %s %d M=%d gain=%.3g ml=%.6f dml=%.3g sigma=%.4g", it, action.move.value, j,
                  len(run.active), action.gain, ml, ml - ml_old, run.sigma)
        if abs(ml - ml_old) < cfg.min_delta:
            converged, reason = True, "min_delta"
            break
        ml_old = ml
    if run.prune():
        run.refit()
    return _snapshot(run, history, converged, it, moves, reason)


def scores(model: ModelState, X) -> np.ndarray:
    """Latent scores f(x) for raw inputs (the model's scaler is applied first)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.d:
        raise InputError(f"expected {model.d} features, got {X.shape[1]}")
    if model.scaler is not None:
        X = model.scaler.transform(X)
    return rbf_matrix(X, model.active_points, model.theta) @ model.w


def categorize(model: ModelState, f) -> np.ndarray:
    """Category k with b_{k-1} < f <= b_k."""
    return np.searchsorted(model.b.cutpoints(), f, side="left") + 1


def predict(model: ModelState, x):
    """(category, score) for one input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError("predict takes a single feature vector; use predict_many")
    f = scores(model, x[None, :])
    return int(categorize(model, f)[0]), float(f[0])


def predict_many(model: ModelState, X):
    f = scores(model, X)
    return categorize(model, f), f


def predict_proba(model: ModelState, X, widen: bool = True) -> np.ndarray:
    """Category probabilities; ``widen`` adds posterior weight variance to sigma^2.

    Accepts a single vector (returns length-r) or a matrix (returns n x r).
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.d:
        raise InputError(f"expected {model.d} features, got {X.shape[1]}")
    Xs = model.scaler.transform(X) if model.scaler is not None else X
    Phi = rbf_matrix(Xs, model.active_points, model.theta)
    f = Phi @ model.w
    var = np.full(f.shape, model.sigma ** 2)
    if widen:
        var = var + np.maximum(np.einsum("ij,jk,ik->i", Phi, model.Sigma, Phi), 0.0)
    sd = np.sqrt(var)
    e = model.b.edges()
    cdf = normal_cdf((e[None, :] - f[:, None]) / sd[:, None])
    p = np.diff(cdf, axis=1)
    p = np.maximum(p, 0.0)
    p /= p.sum(axis=1, keepdims=True)
    return p[0] if single else p

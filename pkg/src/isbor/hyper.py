"""Type-II updates for the cut-points and the noise level."""

from __future__ import annotations

import warnings

import numpy as np

from .likelihood import Thresholds, likelihood_terms, log_likelihood

DELTA_MIN = 1e-3
SIGMA_MIN = 1e-3
SIGMA_MAX = 1e3
MAX_THRESH_STEPS = 10
MAX_BACKTRACK = 30


def threshold_gradients(F, Y, b: Thresholds, sigma: float):
    """dL/db1 and dL/dDelta_i for i = 2..r-1 at fixed scores F.

    Moving b1 shifts every finite edge, so its gradient is -sum(delta).
    Gap i moves the edges b_i..b_{r-1}: samples above class i see both edges
    shift, samples in class i only their upper edge.
    """
    Y = np.asarray(Y, dtype=int)
    terms = likelihood_terms(F, Y, b, sigma)
    db1 = -float(terms.delta.sum())
    dd = np.empty(b.r - 2)
    for k in range(b.r - 2):
        i = k + 2
        dd[k] = -terms.delta[Y > i].sum() + terms.upper_ratio[Y == i].sum() / sigma
    return db1, dd


def _project(b1, deltas, delta_min):
    return Thresholds(b1, np.maximum(deltas, delta_min))


def update_thresholds(F, Y, b: Thresholds, sigma: float, *, step: float | None = None,
                      max_steps: int = MAX_THRESH_STEPS, delta_min: float = DELTA_MIN) -> Thresholds:
    """Projected gradient ascent on L over (b1, gaps) with backtracking.

    A step is taken only if it does not lower L; the step length halves on
    rejection and doubles after an accepted step. Returns ``b`` unchanged if
    no step is accepted.
    """
    F = np.asarray(F, dtype=float)
    n = max(F.size, 1)
    eta = 0.1 / n if step is None else float(step)
    cur = b
    cur_L = log_likelihood(F, Y, cur, sigma)
    for _ in range(max_steps):
        db1, dd = threshold_gradients(F, Y, cur, sigma)
        if db1 == 0.0 and not np.any(dd):
            break
        accepted = False
        for _ in range(MAX_BACKTRACK):
            cand = _project(cur.b1 + eta * db1, cur.deltas + eta * dd, delta_min)
            cand_L = log_likelihood(F, Y, cand, sigma)
            if cand_L >= cur_L:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        gain = cand_L - cur_L
        cur, cur_L = cand, cand_L
        eta *= 2.0
        if gain <= 1e-12 * max(1.0, abs(cur_L)):
            break
    return cur


def update_noise(t_hat, Phi, w, alpha, sigma_diag, prev_sigma: float = 1.0, *,
                 sigma_min: float = SIGMA_MIN, sigma_max: float = SIGMA_MAX) -> float:
    """sigma^2 = ||t_hat - Phi w||^2 / (N - sum_m (1 - alpha_m Sigma_mm)).

    Falls back to ``prev_sigma`` (with a warning) when the effective
    degrees of freedom are not positive.
    """
    t_hat = np.asarray(t_hat, dtype=float)
    Phi = np.asarray(Phi, dtype=float).reshape(t_hat.size, -1)
    w = np.asarray(w, dtype=float).ravel()
    gamma = float(np.sum(1.0 - np.asarray(alpha, dtype=float) * np.asarray(sigma_diag, dtype=float)))
    denom = t_hat.size - gamma
    if not denom > 0:
        warnings.warn(f"noise update skipped: non-positive denominator {denom:.3g}", RuntimeWarning)
        return float(prev_sigma)
    resid = t_hat - Phi @ w if w.size else t_hat
    var = float(np.dot(resid, resid)) / denom
    return float(np.clip(np.sqrt(var), sigma_min, sigma_max))

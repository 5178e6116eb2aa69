"""Brute-force oracles for tests: explicit-C evidence and a batch MAP fit.

Everything here is O(N^3) and refuses large inputs. The production path
(selection, trainer) never imports this module.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky

from .errors import ConvergenceError, InputError, NumericError
from .kernel import KernelCache
from .likelihood import Thresholds
from .posterior import map_estimate
from .trainer import ModelState

MAX_DIRECT_N = 200
MAX_BATCH_N = 2000


@dataclass(frozen=True)
class DirectC:
    """C = H^-1 + Phi A^-1 Phi^T with its lower Cholesky factor."""

    C: np.ndarray
    chol: np.ndarray

    def solve(self, b):
        return cho_solve((self.chol, True), b, check_finite=False)

    def logdet(self) -> float:
        return 2.0 * float(np.log(np.diag(self.chol)).sum())


def direct_C(H, Phi, alpha) -> DirectC:
    h = np.asarray(H, dtype=float)
    if h.ndim == 2:
        h = np.diag(h)
    n = h.size
    if n > MAX_DIRECT_N:
        raise InputError(f"direct C oracle limited to N <= {MAX_DIRECT_N}, got {n}")
    Phi = np.asarray(Phi, dtype=float).reshape(n, -1)
    alpha = np.asarray(alpha, dtype=float).ravel()
    if Phi.shape[1] != alpha.size:
        raise InputError("one precision per active column required")
    C = np.diag(1.0 / h) + (Phi / alpha) @ Phi.T
    C = 0.5 * (C + C.T)
    try:
        L = cholesky(C, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"C is not positive definite: {exc}") from None
    return DirectC(C, L)


def direct_marginal(t_hat, H, Phi, alpha, log_lik: float = 0.0) -> float:
    """L - 0.5 ln|C| - 0.5 t^T C^-1 t with C formed explicitly."""
    dc = direct_C(H, Phi, alpha)
    t = np.asarray(t_hat, dtype=float)
    return float(log_lik - 0.5 * dc.logdet() - 0.5 * t @ dc.solve(t))


def direct_QS(phi_j, t_hat, H, Phi, alpha):
    """(phi_j^T C^-1 t, phi_j^T C^-1 phi_j) by explicit solves."""
    dc = direct_C(H, Phi, alpha)
    phi_j = np.asarray(phi_j, dtype=float)
    u = dc.solve(phi_j)
    return float(u @ np.asarray(t_hat, dtype=float)), float(u @ phi_j)


def batch_map(ds, theta: float, fixed_alpha: float, b: Thresholds | None = None,
              sigma: float = 1.0, max_newton: int = 200) -> ModelState:
    """MAP fit with every training sample as a basis and one shared precision.

    Thresholds and noise stay fixed (``b`` defaults to the unit-spaced
    initialization). Used as an accuracy yardstick for the sparse learner.
    """
    if ds.n > MAX_BATCH_N:
        raise InputError(f"batch fit limited to N <= {MAX_BATCH_N}, got {ds.n}")
    if not fixed_alpha > 0:
        raise InputError("fixed_alpha must be positive")
    b = Thresholds.initial(ds.r) if b is None else b
    Phi = KernelCache(ds.X, theta).gram()
    alpha = np.full(ds.n, float(fixed_alpha))
    converged = True
    try:
        post = map_estimate(Phi, ds.Y, alpha, b, sigma, max_newton=max_newton)
    except ConvergenceError as exc:
        warnings.warn(str(exc), RuntimeWarning)
        post, converged = exc.state, False
    return ModelState(
        active=np.arange(ds.n),
        w=post.w_star,
        alpha=alpha,
        Sigma=post.sigma_post,
        b=b,
        sigma=float(sigma),
        theta=float(theta),
        active_points=ds.X.copy(),
        log_marginal_history=(post.log_marginal,),
        converged=converged,
        n_iter=post.n_iter,
        label_values=ds.label_values,
    )

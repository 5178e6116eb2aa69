"""Laplace posterior over the active weights.

Newton-Raphson finds the MAP weights of L(w) - 0.5 w^T A w; the Gaussian
approximation around that point supplies the covariance, the linearized
targets t_hat and the approximate log evidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, LinAlgError

from .errors import ConvergenceError, InputError, NumericError
from .kernel import DesignMatrix
from .likelihood import LikelihoodTerms, Thresholds, likelihood_terms, log_likelihood

MAX_NEWTON = 50
MAX_HALVINGS = 20
STEP_TOL = 1e-6
GRAD_TOL = 1e-6
JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class PosteriorState:
    w_star: np.ndarray
    sigma_post: np.ndarray
    chol: np.ndarray  # lower Cholesky factor of A + Phi^T H Phi
    t_hat: np.ndarray
    log_marginal: float
    terms: LikelihoodTerms
    scores: np.ndarray
    n_iter: int
    trace: tuple  # log-posterior after each accepted Newton step

    @property
    def logdet_sigma(self) -> float:
        return -2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def gradient(self, Phi, alpha) -> np.ndarray:
        return _as_array(Phi).T @ self.terms.delta - np.asarray(alpha) * self.w_star


def _as_array(Phi) -> np.ndarray:
    if isinstance(Phi, DesignMatrix):
        return Phi.columns
    return np.asarray(Phi, dtype=float)


def stable_cholesky(K: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying with a trace-scaled ridge on failure."""
    try:
        return cholesky(K, lower=True, check_finite=False)
    except LinAlgError:
        pass
    m = K.shape[0]
    scale = max(float(np.trace(K)) / max(m, 1), np.finfo(float).tiny)
    eps = JITTER_START
    while eps <= JITTER_MAX * (1 + 1e-9):
        try:
            return cholesky(K + eps * scale * np.eye(m), lower=True, check_finite=False)
        except LinAlgError:
            eps *= 10.0
    raise NumericError("Cholesky failed after maximal jitter")


def log_posterior(w, Phi, Y, alpha, b: Thresholds, sigma: float) -> float:
    w = np.asarray(w, dtype=float)
    Phi = _as_array(Phi)
    alpha = np.asarray(alpha, dtype=float)
    return log_likelihood(Phi @ w, Y, b, sigma) - 0.5 * float(np.dot(alpha * w, w))


def _finish(Phi, Y, alpha, b, sigma, w, n_iter, trace) -> PosteriorState:
    F = Phi @ w
    terms = likelihood_terms(F, Y, b, sigma)
    hess = np.diag(alpha) + Phi.T @ (terms.hess_diag[:, None] * Phi)
    L = stable_cholesky(hess)
    Sigma = cho_solve((L, True), np.eye(len(w)), check_finite=False)
    Sigma = 0.5 * (Sigma + Sigma.T)
    t_hat = terms.delta / terms.hess_diag + F
    logdet_sigma = -2.0 * float(np.sum(np.log(np.diag(L))))
    ml = (terms.log_lik - 0.5 * float(np.dot(alpha * w, w))
          + 0.5 * float(np.sum(np.log(alpha))) + 0.5 * logdet_sigma)
    return PosteriorState(w, Sigma, L, t_hat, ml, terms, F, n_iter, tuple(trace))


def map_estimate(Phi, Y, alpha, b: Thresholds, sigma: float, w_init=None, *,
                 max_newton: int = MAX_NEWTON, step_tol: float = STEP_TOL,
                 max_halvings: int = MAX_HALVINGS) -> PosteriorState:
    """Maximize the log posterior by damped Newton steps.

    Each step is halved until the log posterior does not decrease. Iteration
    stops once the full Newton step is below ``step_tol`` in max-norm, or
    when no halving improves the objective (a numerical optimum).
    """
    Phi = _as_array(Phi)
    alpha = np.asarray(alpha, dtype=float).ravel()
    n, m = Phi.shape
    if m < 1:
        raise InputError("need at least one active basis")
    if alpha.shape != (m,) or np.any(~(alpha > 0)):
        raise InputError("alpha must be a positive vector with one entry per column")
    if not sigma > 0:
        raise InputError("sigma must be positive")
    w = np.zeros(m) if w_init is None else np.array(w_init, dtype=float).ravel()
    if w.shape != (m,):
        raise InputError(f"w_init has length {w.size}, expected {m}")

    F = Phi @ w
    terms = likelihood_terms(F, Y, b, sigma)
    lp = terms.log_lik - 0.5 * float(np.dot(alpha * w, w))
    trace = [lp]
    for it in range(1, max_newton + 1):
        grad = Phi.T @ terms.delta - alpha * w
        if not np.any(grad):
            return _finish(Phi, Y, alpha, b, sigma, w, it, trace)
        hess = np.diag(alpha) + Phi.T @ (terms.hess_diag[:, None] * Phi)
        step = cho_solve((stable_cholesky(hess), True), grad, check_finite=False)
        t = 1.0
        for _ in range(max_halvings + 1):
            w_new = w + t * step
            F_new = Phi @ w_new
            terms_new = likelihood_terms(F_new, Y, b, sigma)
            lp_new = terms_new.log_lik - 0.5 * float(np.dot(alpha * w_new, w_new))
            if lp_new >= lp:
                break
            t *= 0.5
        else:
            # no improving step left: w is optimal to working precision
            return _finish(Phi, Y, alpha, b, sigma, w, it, trace)
        w, terms, lp = w_new, terms_new, lp_new
        trace.append(lp)
        if np.max(np.abs(step)) < step_tol:
            return _finish(Phi, Y, alpha, b, sigma, w, it, trace)
    state = _finish(Phi, Y, alpha, b, sigma, w, max_newton, trace)
    raise ConvergenceError(f"Newton did not converge in {max_newton} iterations", state=state)


def log_marginal_laplace(state: PosteriorState, alpha) -> float:
    """L - 0.5 w*^T A w* + 0.5 ln|A| + 0.5 ln|Sigma| at the MAP point."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~(alpha > 0)):
        raise NumericError("alpha must be positive")
    d = np.diag(state.chol)
    if np.any(~(d > 0)) or not np.all(np.isfinite(d)):
        raise NumericError("posterior covariance is not positive definite")
    w = state.w_star
    return (state.terms.log_lik - 0.5 * float(np.dot(alpha * w, w))
            + 0.5 * float(np.sum(np.log(alpha))) + 0.5 * state.logdet_sigma)

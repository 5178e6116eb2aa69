"""Fast marginal-likelihood statistics for incremental basis selection.

For every candidate column phi_j the scan computes

    Q_j = phi_j^T H t_hat - phi_j^T H Phi Sigma Phi^T H t_hat
    S_j = phi_j^T H phi_j - phi_j^T H Phi Sigma Phi^T H phi_j

which equal phi_j^T C^-1 t_hat and phi_j^T C^-1 phi_j for
C = H^-1 + Phi A^-1 Phi^T without ever forming C. Columns already in the
model are corrected to leave-one-out values s_j, q_j before scoring.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InputError
from .posterior import PosteriorState, _as_array


class Move(Enum):
    ADD = "add"
    DELETE = "delete"
    REESTIMATE = "reestimate"
    STOP = "stop"


@dataclass(frozen=True)
class Action:
    move: Move
    index: int = -1
    alpha: float = np.inf
    gain: float = 0.0


@dataclass(frozen=True)
class CandidateStats:
    Q: float
    S: float
    q: float
    s: float
    f: float
    g: float
    index: int
    in_model: bool
    eligible: bool


@dataclass(frozen=True)
class CandidateTable:
    """Vectorized CandidateStats over a block of candidates."""

    Q: np.ndarray
    S: np.ndarray
    q: np.ndarray
    s: np.ndarray
    f: np.ndarray
    g: np.ndarray
    new_alpha: np.ndarray
    index: np.ndarray
    in_model: np.ndarray
    eligible: np.ndarray
    move: np.ndarray  # object array of Move per candidate

    def __len__(self):
        return self.index.size

    def row(self, k: int) -> CandidateStats:
        return CandidateStats(float(self.Q[k]), float(self.S[k]), float(self.q[k]),
                              float(self.s[k]), float(self.f[k]), float(self.g[k]),
                              int(self.index[k]), bool(self.in_model[k]), bool(self.eligible[k]))


def delta_ml(alpha, s, q):
    """0.5 * [ln a - ln(a + s) + q^2 / (s + a)]; tends to 0 as a -> inf."""
    alpha = np.asarray(alpha, dtype=float)
    s = np.asarray(s, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * (np.log(alpha) - np.log(alpha + s) + q * q / (s + alpha))
    out = np.where(np.isinf(alpha) & (alpha > 0), 0.0, out)
    return out if out.ndim else float(out)


def alpha_update(s: float, q: float) -> float:
    """Stationary point s^2 / (q^2 - s) of delta_ml in alpha."""
    f = q * q - s
    if not f > 0:
        raise InputError(f"alpha update needs q^2 - s > 0, got {f}")
    return s * s / f


def _raw_qs(cols, Phi, state: PosteriorState, cols_sq=None):
    h = state.terms.hess_diag
    ht = h * state.t_hat
    if Phi.shape[1]:
        # V = H Phi L^-T, so H Phi Sigma Phi^T H = V V^T
        V = solve_triangular(state.chol, (h[:, None] * Phi).T, lower=True, check_finite=False).T
        u = V @ (V.T @ state.t_hat)
        B = cols.T @ np.column_stack([ht - u, V])
        Q = B[:, 0]
        corr = np.einsum("ij,ij->i", B[:, 1:], B[:, 1:])
    else:
        Q = cols.T @ ht
        corr = 0.0
    if cols_sq is None:
        cols_sq = cols * cols
    S = cols_sq.T @ h - corr
    return Q, S


def scan(cols, index, Phi, state: PosteriorState, alpha, active_index, *,
         cols_sq=None, excluded=None, enable_reestimate=True, min_active=1,
         s_tol=1e-12) -> CandidateTable:
    """Score every candidate column and classify the move it would trigger.

    ``cols`` holds the candidate columns (N x J) for sample indices ``index``;
    ``active_index`` lists the samples behind the columns of ``Phi`` with
    precisions ``alpha``. ``g`` is the change in log evidence the move would
    bring: addition g(a_new), re-estimation g(a_new) - g(a_old), deletion
    -g(a_old).
    """
    Phi = _as_array(Phi)
    alpha = np.asarray(alpha, dtype=float)
    index = np.asarray(index, dtype=int)
    Q, S = _raw_qs(cols, Phi, state, cols_sq)

    pos = {int(j): k for k, j in enumerate(active_index)}
    in_model = np.array([int(j) in pos for j in index], dtype=bool)
    a_old = np.full(index.size, np.inf)
    if in_model.any():
        a_old[in_model] = alpha[[pos[int(j)] for j in index[in_model]]]

    s = S.copy()
    q = Q.copy()
    gap = a_old - S
    valid = np.ones(index.size, dtype=bool)
    valid[in_model] = gap[in_model] > 0
    m_ok = in_model & valid
    s[m_ok] = a_old[m_ok] * S[m_ok] / gap[m_ok]
    q[m_ok] = a_old[m_ok] * Q[m_ok] / gap[m_ok]
    valid &= np.isfinite(s) & np.isfinite(q) & (s > s_tol)

    f = q * q - s
    new_alpha = np.full(index.size, np.inf)
    grow = valid & (f > 0)
    new_alpha[grow] = s[grow] ** 2 / f[grow]

    g = np.zeros(index.size)
    move = np.full(index.size, Move.STOP, dtype=object)
    add = grow & ~in_model
    g[add] = delta_ml(new_alpha[add], s[add], q[add])
    move[add] = Move.ADD
    if enable_reestimate:
        re = grow & in_model
        g[re] = delta_ml(new_alpha[re], s[re], q[re]) - delta_ml(a_old[re], s[re], q[re])
        move[re] = Move.REESTIMATE
    if len(active_index) > min_active:
        de = valid & in_model & (f <= 0)
        g[de] = -delta_ml(a_old[de], s[de], q[de])
        move[de] = Move.DELETE

    eligible = move != Move.STOP
    if excluded is not None and len(excluded):
        eligible &= ~np.isin(index, np.fromiter(excluded, dtype=int))
    eligible &= np.isfinite(g)
    g = np.where(eligible, g, 0.0)
    return CandidateTable(Q, S, q, s, f, g, new_alpha, index, in_model, eligible, move)


def concat_tables(tables) -> CandidateTable:
    """Join scans over disjoint candidate blocks into one table."""
    tables = list(tables)
    if len(tables) == 1:
        return tables[0]
    names = CandidateTable.__dataclass_fields__
    return CandidateTable(**{k: np.concatenate([getattr(t, k) for t in tables]) for k in names})


def candidate_stats(j: int, phi_j, Phi, state: PosteriorState, alpha, active_index,
                    **kwargs) -> CandidateStats:
    """Statistics for a single candidate column ``phi_j`` belonging to sample j."""
    col = np.asarray(phi_j, dtype=float).reshape(-1, 1)
    return scan(col, [j], Phi, state, alpha, active_index, **kwargs).row(0)


def ranked_actions(table: CandidateTable, limit: int | None = None) -> list:
    """Eligible moves with positive gain, best first."""
    g = np.where(table.eligible, table.g, -np.inf)
    order = np.argsort(-g, kind="stable")
    out = []
    for k in order[:limit] if limit else order:
        if not g[k] > 0:
            break
        out.append(Action(table.move[k], int(table.index[k]), float(table.new_alpha[k]), float(g[k])))
    return out


def select_action(table: CandidateTable) -> Action:
    """Pick the move with the largest evidence gain; Stop if none gains."""
    best = ranked_actions(table, 1)
    return best[0] if best else Action(Move.STOP)

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from isbor.errors import InputError
from isbor.kernel import rbf_matrix
from isbor.likelihood import Thresholds
from isbor.posterior import map_estimate
from isbor.reference import direct_marginal, direct_QS
from isbor.selection import (Move, alpha_update, candidate_stats, delta_ml, ranked_actions, scan,
                             select_action)

# 0.5 * (3 - ln 4), cross-checked by numeric maximization over alpha
G_AT_THIRD = 0.80685281944005469058


def _problem(rs, n=25, r=3, active=(0, 5, 9), theta=0.4):
    X = rs.normal(size=(n, 2))
    K = rbf_matrix(X, X, theta)
    np.fill_diagonal(K, 1.0)
    Y = rs.integers(1, r + 1, size=n)
    Y[:r] = np.arange(1, r + 1)
    b = Thresholds(-0.4, np.full(r - 2, 0.8))
    active = list(active)
    alpha = rs.uniform(0.2, 3.0, size=len(active))
    st_ = map_estimate(K[:, active], Y, alpha, b, 0.8)
    return K, Y, b, active, alpha, st_


def test_delta_ml_examples():
    assert delta_ml(1.0 / 3.0, 1.0, 2.0) == pytest.approx(G_AT_THIRD, abs=1e-12)
    assert delta_ml(np.inf, 1.0, 2.0) == 0.0
    assert abs(delta_ml(1e15, 1.0, 2.0)) < 1e-12


def test_alpha_update_examples():
    assert alpha_update(1.0, 2.0) == pytest.approx(1.0 / 3.0)
    assert alpha_update(4.0, 3.0) == pytest.approx(3.2)
    with pytest.raises(InputError):
        alpha_update(4.0, 2.0)


@given(st.floats(1e-3, 50), st.floats(-20, 20))
def test_no_finite_optimum_when_f_nonpositive(s, q):
    if q * q > s:
        a = alpha_update(s, q)
        assert a > 0
        assert delta_ml(a, s, q) > 0
    else:
        vals = delta_ml(np.logspace(-3, 8, 200), s, q)
        assert np.all(vals <= 1e-12)
        assert np.all(np.diff(vals) >= -1e-12)


def test_qs_match_explicit_c(rs):
    for _ in range(20):
        K, Y, b, active, alpha, st_ = _problem(rs)
        table = scan(K, np.arange(K.shape[0]), K[:, active], st_, alpha, active)
        H = st_.terms.hess_diag
        for j in range(K.shape[0]):
            Q, S = direct_QS(K[:, j], st_.t_hat, H, K[:, active], alpha)
            assert table.Q[j] == pytest.approx(Q, rel=1e-8, abs=1e-10)
            assert table.S[j] == pytest.approx(S, rel=1e-8, abs=1e-10)


def test_rank_one_identity_for_every_move(rs):
    K, Y, b, active, alpha, st_ = _problem(rs, n=20)
    H, t = st_.terms.hess_diag, st_.t_hat
    base = direct_marginal(t, H, K[:, active], alpha)
    table = scan(K, np.arange(20), K[:, active], st_, alpha, active)
    checked = 0
    for j in range(20):
        row = table.row(j)
        if row.in_model:
            k = active.index(j)
            others = [i for i in range(len(active)) if i != k]
            without = direct_marginal(t, H, K[:, [active[i] for i in others]], alpha[others])
            assert without - base == pytest.approx(-delta_ml(alpha[k], row.s, row.q), abs=1e-6)
            if row.f > 0:
                a2 = alpha.copy()
                a2[k] = table.new_alpha[j]
                moved = direct_marginal(t, H, K[:, active], a2)
                assert moved - base == pytest.approx(row.g, abs=1e-6)
        elif row.f > 0:
            a_new = table.new_alpha[j]
            added = direct_marginal(t, H, K[:, active + [j]], np.append(alpha, a_new))
            assert added - base == pytest.approx(row.g, abs=1e-6)
            checked += 1
    assert checked > 0


def test_zero_column_is_ineligible(rs):
    K, Y, b, active, alpha, st_ = _problem(rs)
    row = candidate_stats(99, np.zeros(K.shape[0]), K[:, active], st_, alpha, active)
    assert row.Q == 0 and row.S == 0 and row.f == 0
    assert not row.eligible


def test_empty_model_s_is_weighted_norm(rs):
    K, Y, b, active, alpha, st_ = _problem(rs)
    phi = K[:, 3]
    empty = map_estimate(K[:, active], Y, alpha, b, 0.8)
    table = scan(phi[:, None], [3], np.empty((K.shape[0], 0)), empty, np.empty(0), [])
    assert table.S[0] == pytest.approx(float(phi @ (empty.terms.hess_diag * phi)))
    assert table.S[0] > 0


def test_deletion_floor_and_stop(rs):
    K, Y, b, active, alpha, st_ = _problem(rs, active=(4,))
    table = scan(K, np.arange(K.shape[0]), K[:, active], st_, alpha, active)
    assert table.move[4] is not Move.DELETE
    none = scan(K[:, :0], np.arange(0), K[:, active], st_, alpha, active)
    assert select_action(none).move is Move.STOP


def test_select_action_prefers_largest_gain(rs):
    K, Y, b, active, alpha, st_ = _problem(rs)
    table = scan(K, np.arange(K.shape[0]), K[:, active], st_, alpha, active)
    act = select_action(table)
    assert act.gain == pytest.approx(table.g.max())
    ranked = ranked_actions(table)
    assert [a.gain for a in ranked] == sorted((a.gain for a in ranked), reverse=True)
    j = act.index
    if act.move is Move.ADD:
        assert j not in active and table.f[j] > 0
    elif act.move is Move.DELETE:
        assert j in active and table.f[j] <= 0
    else:
        assert j in active and table.f[j] > 0


def test_excluded_candidates_never_selected(rs):
    K, Y, b, active, alpha, st_ = _problem(rs)
    full = scan(K, np.arange(K.shape[0]), K[:, active], st_, alpha, active)
    best = select_action(full).index
    table = scan(K, np.arange(K.shape[0]), K[:, active], st_, alpha, active, excluded={best})
    assert select_action(table).index != best


def test_reestimate_can_be_disabled(rs):
    K, Y, b, active, alpha, st_ = _problem(rs)
    table = scan(K, np.arange(K.shape[0]), K[:, active], st_, alpha, active, enable_reestimate=False)
    assert not any(m is Move.REESTIMATE for m in table.move)


def test_realized_gain_tracks_prediction(rs):
    # Refitting w* and H after the add only adds evidence on top of the
    # fixed-surrogate prediction g, so the realized gain never falls short
    # by more than 25%; it can overshoot by more (up to ~1.45x seen).
    ratios = []
    for _ in range(40):
        K, Y, b, active, alpha, st_ = _problem(rs, n=30)
        table = scan(K, np.arange(30), K[:, active], st_, alpha, active, enable_reestimate=False)
        adds = [k for k in range(30) if table.move[k] is Move.ADD]
        if not adds:
            continue
        j = max(adds, key=lambda k: table.g[k])
        after = map_estimate(K[:, active + [j]], Y, np.append(alpha, table.new_alpha[j]), b, 0.8)
        ratios.append((after.log_marginal - st_.log_marginal) / table.g[j])
    ratios = np.array(ratios)
    assert ratios.size >= 20
    assert np.all(ratios > 0.75)
    assert abs(np.median(ratios) - 1.0) < 0.25


def _g_mp(a, s, q):
    return (mp.log(a) - mp.log(a + s) + q * q / (s + a)) / 2


def test_stationarity_of_alpha_update(rs):
    # central differences in 40-digit arithmetic; double precision cannot
    # resolve a 1e-6 slope once alpha drops far below one
    mp.mp.dps = 40
    for _ in range(1000):
        s = 10 ** rs.uniform(-2, 2)
        q = math.copysign(math.sqrt(s + 10 ** rs.uniform(-2, 2)), rs.normal())
        a = alpha_update(s, q)
        am, sm, qm = mp.mpf(a), mp.mpf(s), mp.mpf(q)
        h = am * mp.mpf("1e-12")
        d = (_g_mp(am + h, sm, qm) - _g_mp(am - h, sm, qm)) / (2 * h)
        assert abs(d) < 1e-6
        assert delta_ml(a, s, q) == pytest.approx(float(_g_mp(am, sm, qm)), rel=1e-12, abs=1e-14)

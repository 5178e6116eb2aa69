import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isbor.errors import InputError, NumericError
from isbor.likelihood import (Thresholds, likelihood_terms, log_likelihood, log_mass, log_prob,
                              normal_cdf, z_pair, z_pairs)

# reference values from 50-digit mpmath evaluation
PSI_1 = 0.84134474606854294859
LOG_TAIL_10_9 = -43.628216632280822469
SQRT_2_OVER_PI = 0.79788456080286535588


def test_normal_cdf_values():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(-np.inf) == 0.0 and normal_cdf(np.inf) == 1.0
    assert abs(normal_cdf(1.0) - PSI_1) < 1e-6


def test_thresholds_validation_and_layout():
    b = Thresholds(-1.0, [2.0, 0.5])
    assert b.r == 4
    np.testing.assert_allclose(b.cutpoints(), [-1.0, 1.0, 1.5])
    e = b.edges()
    assert e[0] == -np.inf and e[-1] == np.inf
    with pytest.raises(InputError):
        Thresholds(0.0, [1.0, -0.1])
    with pytest.raises(InputError):
        Thresholds(np.nan)
    np.testing.assert_allclose(Thresholds.initial(5).cutpoints(), [-1.5, -0.5, 0.5, 1.5])
    assert Thresholds.from_cutpoints([-60, -9, 15, 60]).r == 5


def test_z_pair_examples():
    assert z_pair(0.0, 2, Thresholds(0.0), 1.0) == (np.inf, 0.0)
    assert z_pair(0.0, 2, Thresholds(-1.0, [2.0]), 2.0) == (0.5, -0.5)
    with pytest.raises(InputError):
        z_pair(0.0, 3, Thresholds(0.0), 1.0)
    with pytest.raises(InputError):
        z_pair(0.0, 0, Thresholds(0.0), 1.0)


@given(st.floats(-20, 20), st.integers(1, 5), st.floats(0.05, 5))
def test_z1_above_z2(f, y, sigma):
    b = Thresholds(-1.3, [0.4, 1.1, 0.2])
    z1, z2 = z_pair(f, y, b, sigma)
    assert z1 > z2


def test_log_prob_examples():
    assert log_prob(np.inf, 0.0) == pytest.approx(math.log(0.5), abs=1e-12)
    assert log_prob(np.inf, -np.inf) == 0.0
    v = log_prob(10.0, 9.0)
    assert math.isfinite(v)
    assert abs(v - LOG_TAIL_10_9) < 1e-6 * abs(LOG_TAIL_10_9)
    # mirror image in the lower tail
    assert abs(log_prob(-9.0, -10.0) - LOG_TAIL_10_9) < 1e-6 * abs(LOG_TAIL_10_9)
    with pytest.raises(InputError):
        log_prob(1.0, 1.0)


def test_log_prob_monotone_and_finite_in_tails():
    for z2 in (-30.0, -5.0, 0.0, 5.0, 29.0):
        z1 = np.linspace(z2 + 1e-3, 30.0, 400)
        v = log_mass(z1, np.full_like(z1, z2))
        assert np.all(np.isfinite(v))
        assert np.all(np.diff(v) >= -1e-12)


def test_terms_two_class_example():
    b = Thresholds(0.0)
    t = likelihood_terms([0.0], [2], b, 1.0)
    assert t.delta[0] == pytest.approx(SQRT_2_OVER_PI, abs=1e-9)
    assert t.hess_diag[0] == pytest.approx(SQRT_2_OVER_PI ** 2, abs=1e-9)
    t1 = likelihood_terms([0.0], [1], b, 1.0)
    assert t1.delta[0] == pytest.approx(-SQRT_2_OVER_PI, abs=1e-9)
    assert t.log_lik == pytest.approx(math.log(0.5))


def test_terms_match_finite_differences_of_log_prob(rs):
    b = Thresholds(-1.0, [0.7, 1.2])
    for _ in range(200):
        f = rs.uniform(-6, 6)
        y = int(rs.integers(1, 5))
        s = rs.uniform(0.2, 3)
        h = 1e-4
        L = lambda v: log_likelihood([v], [y], b, s)
        d1 = (L(f + h) - L(f - h)) / (2 * h)
        d2 = (L(f + h) - 2 * L(f) + L(f - h)) / h ** 2
        t = likelihood_terms([f], [y], b, s)
        assert t.delta[0] == pytest.approx(d1, rel=1e-6, abs=1e-8)
        assert t.hess_diag[0] == pytest.approx(-d2, rel=1e-4, abs=1e-6)


def test_hessian_positive_before_clamp(rs):
    b = Thresholds(-2.0, [1.0, 0.5, 2.0])
    F = rs.uniform(-15, 15, size=10000)
    Y = rs.integers(1, 6, size=10000)
    sig = rs.uniform(0.1, 5.0)
    t = likelihood_terms(F, Y, b, sig, h_min=-np.inf)
    assert np.all(t.hess_diag > 0)
    assert t.log_lik <= 0


@given(st.floats(-30, 30), st.floats(0.05, 10))
def test_category_probabilities_normalize(f, sigma):
    b = Thresholds(-2.0, [1.5, 0.3, 2.2])
    Y = np.arange(1, 6)
    z1, z2 = z_pairs(np.full(5, f), Y, b, sigma)
    total = np.exp(log_mass(z1, z2)).sum()
    assert abs(total - 1.0) < 1e-10


def test_far_tail_stays_finite():
    b = Thresholds(0.0, [1.0])
    t = likelihood_terms([80.0, -80.0, 0.5], [1, 3, 2], b, 1.0)
    assert np.all(np.isfinite(t.delta)) and np.all(t.hess_diag > 0)
    assert math.isfinite(t.log_lik)


def test_label_out_of_range():
    with pytest.raises(InputError):
        likelihood_terms([0.0], [4], Thresholds(0.0, [1.0]), 1.0)


def test_nonfinite_score_names_sample():
    with pytest.raises(NumericError) as info:
        likelihood_terms([0.0, np.nan], [1, 2], Thresholds(0.0), 1.0)
    assert info.value.index == 1

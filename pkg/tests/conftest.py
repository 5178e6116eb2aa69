import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from isbor.kernel import rbf_matrix
from isbor.likelihood import Thresholds

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_instance(rs, n, r, m=None, theta=0.5, d=2, scale=1.0):
    """Small random problem: (Phi, Y, alpha, b, sigma, w) with every class present when n >= r."""
    X = rs.normal(size=(n, d))
    m = min(n, 4) if m is None else m
    centres = rs.choice(n, size=m, replace=False)
    Phi = rbf_matrix(X, X[centres], theta)
    Y = rs.integers(1, r + 1, size=n)
    if n >= r:
        Y[:r] = np.arange(1, r + 1)
    b = Thresholds(rs.uniform(-1.0, 0.0), rs.uniform(0.3, 1.5, size=r - 2))
    sigma = rs.uniform(0.5, 2.0)
    alpha = rs.uniform(0.1, 2.0, size=m)
    w = rs.normal(scale=scale, size=m)
    return Phi, Y, alpha, b, sigma, w


@pytest.fixture
def rs():
    return np.random.default_rng(12345)


# acceptance outcomes, criterion number -> (status, detail); printed after the run
ACCEPTANCE = {}


def record(n: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE[n] = (status, detail)
    print(f"criterion {n}: {status} {detail}")
    assert ok, detail


def record_skip(n: int, detail: str) -> None:
    ACCEPTANCE[n] = ("SKIP", detail)
    pytest.skip(detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status} {detail}")

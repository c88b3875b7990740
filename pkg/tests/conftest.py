import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dfrc.beampattern import BeampatternSpec, design_covariance, make_covariance_spec

settings.register_profile("dfrc", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dfrc")

# acceptance results, printed in the terminal summary
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@functools.lru_cache(maxsize=None)
def three_beam_spec(n_tx, power=1.0):
    """CovarianceSpec of the default 3-beam design, cached across tests."""
    R = design_covariance(BeampatternSpec(), n_tx, power).R
    return make_covariance_spec(R, power=power)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_unitary(rng, n):
    Q, R = np.linalg.qr(crandn(rng, n, n))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_pd(rng, n, floor=0.1):
    A = crandn(rng, n, n)
    return A @ A.conj().T + floor * np.eye(n)

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gcompml.data import BINARY, CONTINUOUS, TrialDataset

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion label -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def make_dataset(n=60, p_cont=2, p_bin=1, seed=0, effect=0.8):
    rng = np.random.default_rng(seed)
    xc = rng.standard_normal((n, p_cont))
    xb = (rng.random((n, p_bin)) < 0.4).astype(float)
    x = np.hstack([xc, xb])
    a = np.zeros(n)
    a[rng.permutation(n)[: n // 2]] = 1.0
    eta = -0.3 + x @ np.linspace(0.8, -0.5, x.shape[1]) + effect * a
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    kinds = (CONTINUOUS,) * p_cont + (BINARY,) * p_bin
    names = tuple(f"x{j}" for j in range(x.shape[1]))
    return TrialDataset(y, a, x, kinds, names)


@pytest.fixture
def small_data():
    return make_dataset()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[0].rstrip("."))):
        ok, detail = ACCEPTANCE_RESULTS[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")

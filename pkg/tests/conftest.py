import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def two_clusters(seed, n_per=100, d=10, spread=0.5, gap=10.0):
    """Two isotropic Gaussian clusters whose centers are ``gap`` apart."""
    rng = np.random.default_rng(seed)
    c = np.zeros(d)
    c[0] = gap
    X = np.vstack([rng.normal(0.0, spread, (n_per, d)), c + rng.normal(0.0, spread, (n_per, d))])
    labels = np.repeat([0, 1], n_per)
    return X, labels


@pytest.fixture
def clusters():
    return two_clusters(0)


# acceptance results, printed once at the end of the session
ACCEPTANCE = {}


def record_acceptance(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

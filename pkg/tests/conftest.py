from __future__ import annotations

import numpy as np
import pytest


def random_symmetric(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


# acceptance criteria outcomes, filled in by tests/test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        for line in ACCEPTANCE_RESULTS[key]:
            terminalreporter.write_line(line)

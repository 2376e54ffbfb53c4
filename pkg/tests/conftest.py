import sys

import numpy as np
import pytest

from indexfund.similarity import correlation


def synthetic_rho(n, seed, rows=60, groups=4):
    """Correlation of returns from a market factor plus a few sector factors."""
    rng = np.random.default_rng(seed)
    market = rng.normal(size=(rows, 1))
    sector = rng.normal(size=(rows, groups))
    label = rng.integers(0, groups, n)
    r = market * rng.uniform(0.2, 1.5, n) + 0.8 * sector[:, label] + rng.normal(size=(rows, n))
    return correlation(r)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)

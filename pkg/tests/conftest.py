import sys
import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from layertree.model import Instance

settings.register_profile("default", deadline=None, max_examples=150,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def tiny_instances(draw, max_n0=8, max_lam=3, max_count=4):
    n0 = draw(st.integers(1, max_n0))
    lam = draw(st.integers(1, max_lam))
    n = [n0] + [draw(st.integers(0, max_count)) for _ in range(lam)]
    lo, hi = [], []
    for _ in range(lam):
        a = draw(st.integers(0, n0))
        b = draw(st.integers(a, n0))
        lo.append(a)
        hi.append(b)
    return Instance.from_lists(n, lo, hi)


def random_tiny(rng: random.Random, max_n0=10, max_lam=3, max_count=4) -> Instance:
    n0 = rng.randint(1, max_n0)
    lam = rng.randint(1, max_lam)
    n = [n0] + [rng.randint(1, max_count) for _ in range(lam)]
    lo, hi = [], []
    for _ in range(lam):
        a, b = sorted((rng.randint(0, n0), rng.randint(0, n0)))
        lo.append(a)
        hi.append(b)
    return Instance.from_lists(n, lo, hi)


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

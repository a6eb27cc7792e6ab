import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from geodesic_observer import benchmarks  # noqa: E402

# criterion label -> {sub-check: (passed, detail)}; filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, check, passed, detail=""):
    ACCEPTANCE.setdefault(criterion, {})[check] = (bool(passed), detail)


@pytest.fixture(scope="session")
def oscillator():
    return benchmarks.harmonic_oscillator(0.5)


@pytest.fixture(scope="session")
def linear():
    return benchmarks.default_linear()


@pytest.fixture(scope="session")
def planar():
    return benchmarks.default_planar()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n, floor=0.5):
    A = rng.standard_normal((n, n))
    return A @ A.T + floor * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[label]
        ok = all(passed for passed, _ in checks.values())
        failing = [name for name, (passed, _) in checks.items() if not passed]
        detail = "; ".join(f"{name}: {d}" for name, (_, d) in checks.items() if d)
        tail = f" [failing: {', '.join(failing)}]" if failing else ""
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {label}{tail} | {detail}")

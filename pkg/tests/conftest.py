import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_instance(rng, n=8, k=None, length=3, eps_max=0.3):
    """Random two-terminal block: allocation indices, BPSK symbols, CIRs, CFOs."""
    k = n if k is None else k
    indices = np.sort(rng.choice(n, size=k, replace=False))
    x = [rng.choice([-1.0, 1.0], size=k).astype(complex) for _ in range(2)]
    h = [crandn(rng, length) for _ in range(2)]
    eps = tuple(rng.uniform(-eps_max, eps_max, size=2))
    return indices, x, h, eps


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def verdict(number, passed, detail):
    """Record and print one acceptance line, then fail the test if the criterion failed."""
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"CRITERION {number}: {'PASS' if passed else 'FAIL'} {detail}")
    assert passed, detail


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if passed else 'FAIL'} {detail}")

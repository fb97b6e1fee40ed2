import numpy as np
import pytest
import scipy.linalg as sla

from cvqkd_filter import gaussian

ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


def random_symplectic(rng, n=2, scale=0.5):
    h = rng.normal(size=(2 * n, 2 * n))
    h = h + h.T
    return sla.expm(gaussian.symplectic_form(n) @ h * scale)


def random_cm(rng, n=2, scale=0.5, max_extra=None):
    s = random_symplectic(rng, n, scale)
    extra = rng.exponential(1.0, n) if max_extra is None else rng.uniform(0.0, max_extra, n)
    return s @ np.diag(np.repeat(1.0 + extra, 2)) @ s.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

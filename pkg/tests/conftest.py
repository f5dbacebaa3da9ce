import numpy as np
import pytest

from steklov_trace import mesh as M

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def disk05():
    return M.generate_disk(1.0, 0.05)


@pytest.fixture(scope="session")
def disk02():
    return M.generate_disk(1.0, 0.02)


@pytest.fixture(scope="session")
def annulus05():
    return M.generate_annulus(0.5, 1.0, 0.05)


@pytest.fixture(scope="session")
def square():
    return M.generate_rectangle(1.0, 1.0, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

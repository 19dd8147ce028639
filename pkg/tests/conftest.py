import numpy as np
import pytest

from hyperbell.source import CouplingParams


@pytest.fixture
def coupling():
    return CouplingParams(0.1)


def assert_unitary(U, tol=1e-12):
    U = np.asarray(U)
    assert np.max(np.abs(U.conj().T @ U - np.eye(U.shape[1]))) < tol


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

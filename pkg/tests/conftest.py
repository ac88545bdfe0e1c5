import numpy as np
import pytest

from nestavg.design import build

# acceptance lines collected by tests/test_acceptance.py, printed once at the end
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_design(rng, n=40, sizes=(2, 3, 1, 2)):
    nu = np.cumsum(sizes)
    X = rng.standard_normal((n, int(nu[-1])))
    return build(X, nu)


def dense_projection(X):
    """Hat matrix from the normal equations, independent of the QR path."""
    return X @ np.linalg.solve(X.T @ X, X.T)

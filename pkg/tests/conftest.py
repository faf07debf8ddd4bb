import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def four_cycle():
    return np.ones((2, 2))


@pytest.fixture
def path3():
    # two row vertices joined through one column vertex
    return np.ones((2, 1))


@pytest.fixture
def k33():
    return np.ones((3, 3))


def random_sparse(rng, n, m, density=0.5):
    return rng.standard_normal((n, m)) * (rng.random((n, m)) < density)


def core_eigenvalues(a):
    """Eigenvalues of ``a`` after repeatedly dropping indices with a zero row or column.

    Each dropped index carries an exact zero eigenvalue (block-triangular
    structure), so the returned values are the spectrum minus those zeros.
    """
    a = np.asarray(a)
    alive = np.arange(a.shape[0])
    while alive.size:
        sub = a[np.ix_(alive, alive)]
        keep = np.any(sub != 0, axis=1) & np.any(sub != 0, axis=0)
        if keep.all():
            break
        alive = alive[keep]
    if alive.size == 0:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(a[np.ix_(alive, alive)])


def multiset_gap(a, b):
    """Largest distance under the best one-to-one matching of two complex multisets."""
    from scipy.optimize import linear_sum_assignment

    a, b = np.asarray(a), np.asarray(b)
    if a.size != b.size:
        return np.inf
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


ACCEPTANCE_LINES: dict = {}


def record_criterion(number, title, ok, detail):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from antimc import lie

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Lines recorded by the acceptance tests, echoed in the terminal summary so
# they show up even when pytest captures output.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def random_skew(rng, n, scale=1.0):
    return lie.from_coords(scale * rng.standard_normal(lie.algebra_dim(n)), n)


def haar_rotation(rng, n):
    """Haar-distributed element of SO(n) via QR with sign correction."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=2, max_value=8)

import numpy as np
import pytest

from reduxon import Layout, basis_partition, random_state, random_unitary


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_ranks(d, rng):
    n = int(rng.integers(2, d + 1))
    cuts = np.sort(rng.choice(np.arange(1, d), n - 1, replace=False))
    return [int(r) for r in np.diff([0, *cuts, d])]


def random_pset(layout, active, rng, ranks=None):
    d_a = int(np.prod([layout.dims[k] for k in active])) if active else layout.total_dim
    ranks = random_ranks(d_a, rng) if ranks is None else ranks
    return basis_partition(layout, random_unitary(d_a, rng), ranks, active)


def random_hermitian(d, rng, scale=1.0):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (g + g.conj().T)


def random_problem(rng, partial=None, max_dim=12):
    """Random (rho, pset); ``partial`` forces the kind of projector set."""
    if partial is None:
        partial = bool(rng.random() < 0.5)
    if partial:
        while True:
            da, db = (int(x) for x in rng.integers(2, 5, size=2))
            if da * db <= max_dim:
                break
        layout, active = Layout([da, db]), (0,)
    else:
        layout, active = Layout([int(rng.integers(2, max_dim + 1))]), ()
    rank = int(rng.integers(1, layout.total_dim + 1))
    return random_state(layout, rank, rng), random_pset(layout, active, rng)


def series_expm(a, order=8, squarings=10):
    """Truncated Taylor series of exp(a) with scaling and squaring."""
    x = a / 2**squarings
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, order + 1):
        term = term @ x / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.REPORT:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(test_acceptance.REPORT):
            terminalreporter.write_line(test_acceptance.REPORT[cid])

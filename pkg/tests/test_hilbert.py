import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from reduxon.hilbert import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DensityOperator,
    InvalidStateError,
    Layout,
    LayoutError,
    Operator,
    embed,
    evolve,
    herm_fn,
    identity,
    maximally_mixed,
    partial_trace,
    permute_subsystems,
    propagator,
    random_state,
    random_unitary,
    tensor,
    xlnx,
)

from conftest import random_hermitian, series_expm


class TestLayout:
    def test_total_dim(self):
        lay = Layout([2, 3, 2])
        assert lay.total_dim == 12
        assert lay.n == 3
        assert lay.complement([1]) == (0, 2)
        assert lay.sub([0, 1]).dims == (2, 3)

    def test_rejects_bad_dims(self):
        with pytest.raises(LayoutError):
            Layout([2, 0])
        with pytest.raises(LayoutError):
            Layout([2, 1024])

    def test_rejects_bad_subset(self):
        with pytest.raises(LayoutError):
            Layout([2, 2]).check_subset([2])
        with pytest.raises(LayoutError):
            Layout([2, 2]).check_subset([-1])


class TestDensityOperator:
    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidStateError):
            DensityOperator(Layout([2]), [[0.5, 0.1], [0.0, 0.5]])

    def test_rejects_bad_trace(self):
        with pytest.raises(InvalidStateError):
            DensityOperator(Layout([2]), np.eye(2))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidStateError):
            DensityOperator(Layout([2]), np.diag([1.1, -0.1]))

    def test_clips_tiny_negative_eigenvalue(self):
        rho = DensityOperator(Layout([2]), np.diag([1.0 + 1e-10, -1e-10]))
        assert np.linalg.eigvalsh(rho.matrix)[0] >= 0
        assert_allclose(np.trace(rho.matrix).real, 1.0, atol=1e-15)

    def test_matrix_is_read_only(self):
        rho = maximally_mixed(Layout([2]))
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0

    def test_shape_mismatch(self):
        with pytest.raises(LayoutError):
            Operator(Layout([2, 2]), np.eye(2))


class TestTensor:
    def test_identity(self):
        assert_array_equal(tensor(identity(2), identity(3)).matrix, np.eye(6))

    def test_diagonal(self):
        a = Operator(Layout([2]), np.diag([1, 0]))
        b = Operator(Layout([2]), np.diag([1, 1]))
        assert_array_equal(tensor(a, b).matrix, np.diag([1, 1, 0, 0]))

    def test_index_formula(self, rng):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        ab = tensor(Operator(Layout([2]), a), Operator(Layout([3]), b))
        assert ab.layout.dims == (2, 3)
        for i in range(2):
            for j in range(2):
                for p in range(3):
                    for q in range(3):
                        assert abs(ab.matrix[3 * i + p, 3 * j + q] - a[i, j] * b[p, q]) <= 1e-15

    def test_density_in_density_out(self):
        rho = tensor(maximally_mixed(Layout([2])), maximally_mixed(Layout([3])))
        assert isinstance(rho, DensityOperator)


class TestEmbed:
    def test_identity(self):
        lay = Layout([2, 3, 2])
        assert_allclose(embed(np.eye(3), lay, 1).matrix, np.eye(12))

    def test_trace_of_embedded_projector(self):
        p = np.diag([1.0, 0.0])
        e = embed(p, Layout([2, 2]), 0)
        assert np.trace(p) == 1
        assert_allclose(e.trace(), 2.0)

    def test_disjoint_embeds_commute(self, rng):
        lay = Layout([2, 3, 2])
        a = embed(random_hermitian(2, rng), lay, 0).matrix
        b = embed(random_hermitian(2, rng), lay, 2).matrix
        assert np.max(np.abs(a @ b - b @ a)) <= 1e-12

    def test_matches_kron(self, rng):
        x = random_hermitian(3, rng)
        assert_allclose(embed(x, Layout([2, 3, 2]), 1).matrix, np.kron(np.kron(np.eye(2), x), np.eye(2)))


class TestPartialTrace:
    def test_product_state(self, rng):
        ra, rb = random_state([2], 2, rng), random_state([3], 3, rng)
        assert_allclose(partial_trace(tensor(ra, rb), [0]).matrix, rb.matrix, atol=1e-12)
        assert_allclose(partial_trace(tensor(ra, rb), [1]).matrix, ra.matrix, atol=1e-12)

    def test_bell_state(self):
        bell = DensityOperator.from_ket([2, 2], [1, 0, 0, 1])
        assert_allclose(partial_trace(bell, [0]).matrix, np.eye(2) / 2, atol=1e-15)

    def test_duality(self, rng):
        lay = Layout([2, 2, 2])
        rho = random_state(lay, 8, rng)
        red = partial_trace(rho, [0, 1]).matrix
        for _ in range(50):
            x = random_hermitian(2, rng)
            lhs = np.trace(red @ x)
            rhs = np.trace(rho.matrix @ np.kron(np.eye(4), x))
            assert abs(lhs - rhs) <= 1e-12

    def test_middle_subsystem(self, rng):
        # keep subsystem 1 of a (2, 3, 2) product
        parts = [random_state([d], d, rng) for d in (2, 3, 2)]
        rho = tensor(tensor(parts[0], parts[1]), parts[2])
        assert_allclose(partial_trace(rho, [0, 2]).matrix, parts[1].matrix, atol=1e-12)

    def test_trace_everything(self, rng):
        rho = random_state([2, 2], 2, rng)
        out = partial_trace(rho, [0, 1])
        assert out.layout.dims == ()
        assert_allclose(out.matrix, [[1.0]])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(2, 4), min_size=2, max_size=3), st.integers(0, 2**32 - 1))
    def test_recovers_factors(self, dims, seed):
        rng = np.random.default_rng(seed)
        parts = [random_state([d], d, rng) for d in dims]
        rho = parts[0]
        for p in parts[1:]:
            rho = tensor(rho, p)
        for k, p in enumerate(parts):
            others = [j for j in range(len(dims)) if j != k]
            assert np.max(np.abs(partial_trace(rho, others).matrix - p.matrix)) <= 1e-12


class TestPermute:
    def test_swap(self, rng):
        a, b = random_hermitian(2, rng), random_hermitian(3, rng)
        swapped = permute_subsystems(np.kron(a, b), [2, 3], [1, 0])
        assert_allclose(swapped, np.kron(b, a), atol=1e-14)


class TestEvolve:
    def test_zero_time(self, rng):
        rho = random_state([3], 3, rng)
        assert evolve(rho, Operator(Layout([3]), random_hermitian(3, rng)), 0.0) is rho

    def test_stationary(self, rng):
        rho = DensityOperator(Layout([2]), np.diag([0.7, 0.3]))
        out = evolve(rho, Operator(Layout([2]), SIGMA_Z), 1.234)
        assert_allclose(out.matrix, rho.matrix, atol=1e-15)

    def test_series_oracle(self, rng):
        rho = random_state([2], 2, rng)
        dt = np.pi / 3
        u = series_expm(-1j * SIGMA_Z * dt)
        out = evolve(rho, Operator(Layout([2]), SIGMA_Z), dt)
        assert_allclose(out.matrix, u @ rho.matrix @ u.conj().T, atol=1e-12)

    def test_propagator_is_unitary(self, rng):
        u = propagator(Operator(Layout([4]), random_hermitian(4, rng)), 0.7)
        assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)

    def test_spectrum_preserved(self, rng):
        rho = random_state([2, 3], 4, rng)
        out = evolve(rho, Operator(rho.layout, random_hermitian(6, rng)), 2.5)
        assert_allclose(np.linalg.eigvalsh(out.matrix), np.linalg.eigvalsh(rho.matrix), atol=1e-10)

    def test_rejects_non_hermitian(self, rng):
        rho = random_state([2], 2, rng)
        with pytest.raises(ValueError):
            evolve(rho, Operator(Layout([2]), [[0, 1], [0, 0]]), 1.0)

    def test_layout_mismatch(self, rng):
        with pytest.raises(LayoutError):
            evolve(random_state([2], 1, rng), identity(3), 1.0)


class TestHermFn:
    def test_sqrt_diagonal(self):
        out = herm_fn(Operator(Layout([2]), np.diag([4.0, 9.0])), np.sqrt)
        assert_allclose(out.matrix, np.diag([2.0, 3.0]), atol=1e-15)

    def test_xlnx_convention(self):
        out = herm_fn(Operator(Layout([2]), np.diag([1.0, 0.0])), xlnx)
        assert_array_equal(out.matrix, np.zeros((2, 2)))

    def test_sqrt_squares_back(self, rng):
        g = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        m = g @ g.conj().T
        s = herm_fn(Operator(Layout([5]), m), lambda x: np.sqrt(np.clip(x, 0, None))).matrix
        assert np.max(np.abs(s @ s - m)) <= 1e-9

    def test_exp_series_oracle(self, rng):
        for _ in range(10):
            h = random_hermitian(4, rng)
            h *= rng.uniform(0.1, 5.0) / np.linalg.norm(h, 2)
            out = herm_fn(Operator(Layout([4]), h), np.exp).matrix
            assert np.max(np.abs(out - series_expm(h))) <= 1e-9


class TestRandomState:
    def test_pure(self):
        rho = random_state([2, 3], 1, seed=3)
        assert abs(rho.purity() - 1.0) <= 1e-10

    def test_deterministic(self):
        assert_array_equal(random_state([4], 2, seed=9).matrix, random_state([4], 2, seed=9).matrix)

    def test_full_rank(self):
        for seed in range(100):
            assert np.linalg.eigvalsh(random_state([4], 4, seed=seed).matrix)[0] > 1e-12

    def test_rank(self):
        rho = random_state([6], 3, seed=1)
        assert np.sum(np.linalg.eigvalsh(rho.matrix) > 1e-12) == 3

    def test_random_unitary(self):
        u = random_unitary(5, seed=4)
        assert_allclose(u @ u.conj().T, np.eye(5), atol=1e-12)


def test_trace_cyclicity(rng):
    for _ in range(20):
        a, b, c = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(3))
        assert abs(np.trace(a @ b @ c) - np.trace(b @ c @ a)) <= 1e-10


def test_pauli_algebra():
    assert_allclose(SIGMA_X @ SIGMA_Y, 1j * SIGMA_Z)

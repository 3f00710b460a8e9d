import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from reduxon.dynamics import (
    Event,
    HistorySchedule,
    build_dephasing,
    build_pointer,
    decoherence_time,
    dephasing_factor,
    ensemble_frequencies,
    noninterference_defect,
    run_history,
    stability_defect,
)
from reduxon.hilbert import (
    Layout,
    LayoutError,
    Operator,
    ReduxonError,
    embed,
    evolve,
    partial_trace,
    random_state,
    SIGMA_Z,
)
from reduxon.metrics import trace_distance
from reduxon.projector import validate
from reduxon.reduction import reduce, weights
from reduxon.sieve import entropy

from conftest import random_hermitian, random_pset


@pytest.fixture(scope="module")
def bath():
    return build_dephasing(5, seed=3)


def two_event_schedule(model, dt):
    z, x = model.system_pset(0.0), model.system_pset(np.pi / 2)
    return HistorySchedule(model.initial_state(), model.hamiltonian, (Event(dt, z), Event(2 * dt, x)))


class TestDephasingModel:
    def test_single_coupling(self):
        m = build_dephasing(1, couplings=[1.0])
        assert_allclose(m.hamiltonian.matrix, np.diag([1, -1, -1, 1]))

    def test_seeded(self):
        assert build_dephasing(4, seed=11).couplings == build_dephasing(4, seed=11).couplings
        assert build_dephasing(4, seed=11).couplings != build_dephasing(4, seed=12).couplings
        assert all(0.5 <= g <= 1.5 for g in build_dephasing(6, seed=1).couplings)

    def test_eight_qubit_bath(self):
        m = build_dephasing(8, seed=7)
        h = m.hamiltonian.matrix
        assert h.shape == (512, 512)
        assert m.hamiltonian.is_hermitian()
        sz = embed(SIGMA_Z, m.layout, 0).matrix
        assert np.max(np.abs(h @ sz - sz @ h)) <= 1e-12

    def test_limits(self):
        with pytest.raises(ReduxonError):
            build_dephasing(10)
        with pytest.raises(ReduxonError):
            build_dephasing(0)
        with pytest.raises(ReduxonError):
            build_dephasing(2, couplings=[1.0])

    def test_factor_values(self):
        m = build_dephasing(1, couplings=[1.0])
        assert dephasing_factor(m, 0.0) == 1
        assert abs(dephasing_factor(m, np.pi / 4)) < 1e-15
        assert dephasing_factor(m, np.array([0.0, 0.1])).shape == (2,)

    def test_factor_matches_simulation(self, bath):
        rho0 = bath.initial_state()
        for t in np.linspace(0, 3, 25):
            sys = partial_trace(evolve(rho0, bath.hamiltonian, t), range(1, 6)).matrix
            assert abs(2 * sys[0, 1] - dephasing_factor(bath, t)) <= 1e-10

    def test_factor_scales_with_amplitudes(self, bath):
        alpha, beta = 0.6, 0.8j
        rho0 = bath.initial_state(alpha, beta)
        t = 0.37
        sys = partial_trace(evolve(rho0, bath.hamiltonian, t), range(1, 6)).matrix
        assert abs(sys[0, 1] - alpha * np.conj(beta) * dephasing_factor(bath, t)) <= 1e-12

    def test_decoherence_time(self, bath):
        tau = decoherence_time(bath)
        ts = np.linspace(0, tau, 200)
        assert abs(dephasing_factor(bath, tau)) < 0.05
        assert np.all(np.abs(dephasing_factor(bath, ts[:-1])) >= 0.05 - 1e-3)


class TestPointerModel:
    def test_structure(self):
        m = build_pointer(2, kick=0.8, seed=1)
        assert m.layout.dims == (2, 3, 2, 2)
        assert m.hamiltonian.is_hermitian()
        pset = m.pointer_pset()
        assert validate(pset).passed
        assert pset.local_ranks == (1, 2)

    def test_system_z_conserved(self):
        m = build_pointer(1, seed=2)
        sz = embed(SIGMA_Z, m.layout, 0).matrix
        h = m.hamiltonian.matrix
        assert np.max(np.abs(h @ sz - sz @ h)) <= 1e-12

    def test_pointer_moves(self):
        m = build_pointer(1, kick=1.0, seed=2)
        before = weights(m.initial_state(), m.pointer_pset((1, 1, 1)))
        after = weights(evolve(m.initial_state(), m.hamiltonian, 0.5), m.pointer_pset((1, 1, 1)))
        assert_allclose(before, [0, 1, 0], atol=1e-15)
        assert after[1] < 0.99


class TestSchedule:
    def test_event_mode_checks(self, bath):
        with pytest.raises(ReduxonError):
            Event(1.0, bath.system_pset(), "vndlp")
        with pytest.raises(ReduxonError):
            Event(1.0, random_pset(Layout([2]), (), np.random.default_rng(1)), "partial")
        with pytest.raises(ReduxonError):
            Event(1.0, bath.system_pset(), "bogus")

    def test_event_order(self, bath):
        z = bath.system_pset()
        with pytest.raises(ReduxonError):
            HistorySchedule(bath.initial_state(), bath.hamiltonian, (Event(2.0, z), Event(1.0, z)))
        with pytest.raises(ReduxonError):
            HistorySchedule(bath.initial_state(), bath.hamiltonian, (Event(1.0, z),), t_final=0.5)

    def test_layout_checks(self, bath):
        other = build_dephasing(2, seed=1)
        with pytest.raises(LayoutError):
            HistorySchedule(bath.initial_state(), other.hamiltonian)
        with pytest.raises(LayoutError):
            HistorySchedule(bath.initial_state(), bath.hamiltonian, (Event(1.0, other.system_pset()),))


class TestRunHistory:
    def test_no_events(self, bath):
        s = HistorySchedule(bath.initial_state(), bath.hamiltonian, (), t_final=1.3)
        rec = run_history(s)
        assert_allclose(rec.final_state.matrix, evolve(bath.initial_state(), bath.hamiltonian, 1.3).matrix, atol=1e-14)
        assert rec.weights == [] and rec.final is None

    def test_idempotent_without_dynamics(self, rng):
        rho = random_state([3, 2], 6, rng)
        pset = random_pset(rho.layout, (0,), rng)
        h0 = Operator(rho.layout, np.zeros((6, 6)))
        events = tuple(Event(float(t), pset) for t in (1, 2, 3))
        rec = run_history(HistorySchedule(rho, h0, events))
        for st in rec.states[1:]:
            assert_allclose(st.matrix, rec.states[0].matrix, atol=1e-12)

    def test_weights_and_final(self, bath):
        s = two_event_schedule(bath, 0.4)
        rec = run_history(s)
        assert len(rec.weights) == 2
        assert_allclose(rec.weights[0], [0.5, 0.5], atol=1e-12)
        assert_allclose(rec.final.weights, rec.weights[-1], atol=1e-12)

    def test_sampled_outcomes_deterministic(self, bath):
        s = two_event_schedule(bath, 0.4)
        a = run_history(s, sample=True, seed=5)
        b = run_history(s, sample=True, seed=5)
        assert a.outcomes == b.outcomes
        assert_array_equal(a.final_state.matrix, b.final_state.matrix)

    def test_sampling_needs_seed(self, bath):
        with pytest.raises(ReduxonError):
            run_history(two_event_schedule(bath, 0.4), sample=True)

    def test_sampled_statistics_after_decoherence(self):
        # a bath that stays decohered at both event times (no early revival)
        model = build_dephasing(3, seed=8)
        tau = decoherence_time(model)
        assert abs(dephasing_factor(model, 2 * tau)) < 0.05
        s = two_event_schedule(model, tau)
        single = run_history(s.with_events(s.events[-1:])).weights[-1]
        n = 10_000
        finals = np.array([run_history(s, sample=True, seed=[21, j]).outcomes[-1] for j in range(n)])
        f = np.bincount(finals, minlength=2) / n
        radius = 4 * np.sqrt(single * (1 - single) / n)
        assert np.all(np.abs(f - single) <= radius)

    def test_vndlp_entropy_nondecreasing(self, rng):
        for _ in range(10):
            rho = random_state([4], int(rng.integers(1, 5)), rng)
            h = Operator(rho.layout, random_hermitian(4, rng))
            events = tuple(Event(float(t), random_pset(rho.layout, (), rng), "vndlp") for t in (0.5, 1.0, 1.7, 2.1))
            rec = run_history(HistorySchedule(rho, h, events))
            s = [entropy(rho)] + [entropy(st) for st in rec.states]
            assert all(b >= a - 1e-10 for a, b in zip(s, s[1:]))

    def test_lueders_mode(self, rng):
        rho = random_state([3], 1, rng)
        pset = random_pset(rho.layout, (), rng)
        h = Operator(rho.layout, np.zeros((3, 3)))
        rec = run_history(HistorySchedule(rho, h, (Event(1.0, pset, "lueders"),)))
        assert_allclose(weights(rec.final_state, pset), weights(rho, pset), atol=1e-12)


class TestNoninterference:
    def test_commuting(self, bath):
        z = bath.system_pset()
        s = HistorySchedule(bath.initial_state(), bath.hamiltonian, (Event(0.3, z), Event(0.9, z), Event(1.4, z)))
        assert noninterference_defect(s) <= 1e-10

    def test_no_dynamics_repeated_set(self, rng):
        rho = random_state([2, 3], 6, rng)
        pset = random_pset(rho.layout, (0,), rng)
        h0 = Operator(rho.layout, np.zeros((6, 6)))
        s = HistorySchedule(rho, h0, (Event(1.0, pset), Event(2.0, pset)))
        assert noninterference_defect(s) <= 1e-12

    def test_inserted_duplicate_is_harmless(self, rng):
        rho = random_state([2, 2], 4, rng)
        p, q = random_pset(rho.layout, (0,), rng), random_pset(rho.layout, (0,), rng)
        h0 = Operator(rho.layout, np.zeros((4, 4)))
        base = HistorySchedule(rho, h0, (Event(1.0, p), Event(3.0, q)))
        padded = base.with_events((Event(1.0, p), Event(2.0, p), Event(3.0, q)))
        assert abs(noninterference_defect(base) - noninterference_defect(padded)) <= 1e-12

    def test_contrast(self):
        model = build_dephasing(8, seed=7)
        tau = decoherence_time(model)
        assert noninterference_defect(two_event_schedule(model, tau)) < 0.01
        assert abs(dephasing_factor(model, 0.05)) > 0.9
        assert noninterference_defect(two_event_schedule(model, 0.05)) > 0.1

    def test_needs_two_events(self, bath):
        with pytest.raises(ReduxonError):
            noninterference_defect(HistorySchedule(bath.initial_state(), bath.hamiltonian, (Event(1.0, bath.system_pset()),)))


class TestStabilityDefect:
    def test_zero_window(self, bath):
        assert stability_defect(bath.initial_state(), bath.system_pset(np.pi / 2), bath.hamiltonian, 0.0) == 0

    def test_commuting(self, bath):
        for t in np.linspace(0, 5, 11):
            assert stability_defect(bath.initial_state(), bath.system_pset(0.0), bath.hamiltonian, t) <= 1e-12

    def test_tracks_dephasing_factor(self, bath):
        rho0 = bath.initial_state()
        x = bath.system_pset(np.pi / 2)
        for t in np.linspace(0, 3, 31):
            d = stability_defect(rho0, x, bath.hamiltonian, t)
            assert abs((1 - 2 * d) - dephasing_factor(bath, t).real) <= 1e-9

    def test_below_trace_distance(self, rng):
        for _ in range(30):
            rho = random_state([2, 2], int(rng.integers(1, 5)), rng)
            pset = random_pset(rho.layout, (0,) if rng.random() < 0.5 else (), rng)
            h = Operator(rho.layout, random_hermitian(4, rng))
            dt = float(rng.uniform(0, 3))
            hat = reduce(rho, pset).hat
            assert stability_defect(rho, pset, h, dt) <= trace_distance(hat, evolve(hat, h, dt)) + 1e-12


class TestEnsemble:
    def test_certain_outcome(self, bath):
        s = HistorySchedule(bath.initial_state(1.0, 0.0), bath.hamiltonian, (Event(1.0, bath.system_pset()),))
        res = ensemble_frequencies(s, 500, seed=1)
        assert_array_equal(res.frequencies, [1.0, 0.0])
        assert not res.flags.any()

    def test_binomial(self):
        m = build_dephasing(1, couplings=[1.0])
        s = HistorySchedule(m.initial_state(), m.hamiltonian, (Event(1.0, m.system_pset()),))
        res = ensemble_frequencies(s, 100_000, seed=3)
        assert_allclose(res.weights, [0.5, 0.5], atol=1e-12)
        assert np.all(np.abs(res.frequencies - 0.5) <= 0.0063)
        assert not res.flags.any()
        assert res.counts.sum() == 100_000

    def test_deterministic_and_thread_independent(self, bath):
        s = two_event_schedule(bath, 0.3)
        a = ensemble_frequencies(s, 9000, seed=4, threads=1)
        b = ensemble_frequencies(s, 9000, seed=4, threads=3)
        c = ensemble_frequencies(s, 9000, seed=4)
        assert_array_equal(a.counts, b.counts)
        assert_array_equal(a.counts, c.counts)

    def test_exact_weights_match_mixture(self, bath):
        s = two_event_schedule(bath, 0.3)
        res = ensemble_frequencies(s, 10, seed=1)
        assert_allclose(res.weights, run_history(s).weights[-1], atol=1e-12)

    def test_as_dict(self, bath):
        d = ensemble_frequencies(two_event_schedule(bath, 0.3), 100, seed=2).as_dict()
        assert d["M"] == 100 and sum(d["counts"]) == 100

    def test_bad_inputs(self, bath):
        s = two_event_schedule(bath, 0.3)
        with pytest.raises(ReduxonError):
            ensemble_frequencies(s, 0, seed=1)
        with pytest.raises(ReduxonError):
            ensemble_frequencies(s.with_events(()), 10, seed=1)

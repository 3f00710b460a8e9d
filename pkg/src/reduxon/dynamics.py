"""Toy Hamiltonians, reduction histories and their diagnostics.

The central-spin dephasing model has Hamiltonian
``H = sum_k g_k sigma_z^(sys) sigma_z^(k)``; with the environment prepared
in ``|+>^n`` the system coherence is multiplied by
``r(t) = prod_k cos(2 g_k t)``, which serves as an analytic oracle for
the simulator.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .hilbert import (
    MAX_DIM,
    SIGMA_Z,
    DensityOperator,
    Layout,
    LayoutError,
    Operator,
    ReduxonError,
    embed,
    evolve,
    make_rng,
)
from .metrics import pseudometric
from .projector import ProjectorSet, basis_partition, qubit_basis
from .reduction import (
    ZERO_WEIGHT,
    ReducedState,
    lueders_branch,
    lueders_mix,
    partial_hat,
    pick,
    reduce,
    uniform_from_seed,
    vn_hat,
    vndlp_branch,
    weights,
)

MODES = ("lueders", "vndlp", "partial")
MAX_TREE_NODES = 100_000
CHUNK = 4096


@dataclass(frozen=True, eq=False)
class DephasingModel:
    couplings: tuple[float, ...]

    @property
    def n_env(self) -> int:
        return len(self.couplings)

    @property
    def layout(self) -> Layout:
        return Layout([2] * (self.n_env + 1))

    @cached_property
    def hamiltonian(self) -> Operator:
        lay = self.layout
        sz_sys = embed(SIGMA_Z, lay, 0).matrix
        m = sum(g * (sz_sys @ embed(SIGMA_Z, lay, k + 1).matrix) for k, g in enumerate(self.couplings))
        return Operator(lay, m)

    def initial_state(self, alpha: complex = 2**-0.5, beta: complex = 2**-0.5) -> DensityOperator:
        """``(alpha|0> + beta|1>) (x) |+>^n``."""
        ket = np.array([alpha, beta], dtype=complex)
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        for _ in range(self.n_env):
            ket = np.kron(ket, plus)
        return DensityOperator.from_ket(self.layout, ket)

    def system_pset(self, theta: float = 0.0, phi: float = 0.0) -> ProjectorSet:
        """Rank-one partition of the system qubit along the Bloch direction
        ``(theta, phi)``; the environment is left unreduced."""
        return basis_partition(self.layout, qubit_basis(theta, phi), (1, 1), active_set=[0])


def build_dephasing(n_env: int, couplings: Optional[Sequence[float]] = None, seed=None) -> DephasingModel:
    """Central spin coupled to ``n_env`` environment qubits.

    Couplings are taken as given, or drawn uniformly from ``[0.5, 1.5]``.
    """
    if n_env < 1:
        raise ReduxonError("n_env must be at least 1")
    if 2 ** (n_env + 1) > MAX_DIM:
        raise ReduxonError(f"n_env = {n_env} exceeds the dense limit of {MAX_DIM} states")
    if couplings is None:
        g = make_rng(seed).uniform(0.5, 1.5, n_env)
    else:
        g = np.asarray(couplings, dtype=float)
        if g.shape != (n_env,):
            raise ReduxonError(f"expected {n_env} couplings, got {g.size}")
    return DephasingModel(tuple(float(x) for x in g))


def dephasing_factor(model: DephasingModel, t):
    """Analytic coherence factor ``prod_k cos(2 g_k t)``."""
    t = np.asarray(t, dtype=float)
    g = np.asarray(model.couplings)
    r = np.prod(np.cos(2.0 * np.multiply.outer(t, g)), axis=-1)
    return r.astype(complex) if r.ndim else complex(r)


def decoherence_time(model: DephasingModel, threshold: float = 0.05, t_max: float = 20.0, n: int = 20001) -> float:
    """First grid time at which ``|r(t)|`` drops below ``threshold``."""
    t = np.linspace(0.0, t_max, n)
    below = np.nonzero(np.abs(dephasing_factor(model, t)) < threshold)[0]
    if below.size == 0:
        raise ReduxonError("coherence never drops below threshold on the search grid")
    return float(t[below[0]])


@dataclass(frozen=True, eq=False)
class PointerModel:
    """System qubit, three-level pointer and dephasing environment qubits.

    The pointer is displaced conditionally on ``sigma_z`` of the system and
    its position dephases through the environment couplings.
    """

    kick: float
    couplings: tuple[float, ...]

    @property
    def layout(self) -> Layout:
        return Layout([2, 3] + [2] * len(self.couplings))

    @cached_property
    def hamiltonian(self) -> Operator:
        lay = self.layout
        # hermitian generator of cyclic pointer shifts
        shift = np.roll(np.eye(3), 1, axis=0)
        gen = 1j * (shift - shift.conj().T)
        position = np.diag([-1.0, 0.0, 1.0]).astype(complex)
        m = self.kick * embed(SIGMA_Z, lay, 0).matrix @ embed(gen, lay, 1).matrix
        for k, g in enumerate(self.couplings):
            m = m + g * embed(position, lay, 1).matrix @ embed(SIGMA_Z, lay, k + 2).matrix
        return Operator(lay, m)

    def initial_state(self) -> DensityOperator:
        ket = np.kron(np.array([1, 1]) / np.sqrt(2), np.array([0, 1, 0]))
        plus = np.array([1, 1]) / np.sqrt(2)
        for _ in self.couplings:
            ket = np.kron(ket, plus)
        return DensityOperator.from_ket(self.layout, ket)

    def pointer_pset(self, ranks: Sequence[int] = (1, 2)) -> ProjectorSet:
        """Coarse pointer macrostates in the position basis (rank > 1 allowed)."""
        return basis_partition(self.layout, np.eye(3), ranks, active_set=[1])


def build_pointer(n_env: int = 2, kick: float = 1.0, couplings: Optional[Sequence[float]] = None, seed=None) -> PointerModel:
    if 2 * 3 * 2**n_env > MAX_DIM:
        raise ReduxonError("pointer model exceeds the dense limit")
    if couplings is None:
        couplings = make_rng(seed).uniform(0.5, 1.5, n_env)
    return PointerModel(float(kick), tuple(float(g) for g in couplings))


@dataclass(frozen=True, eq=False)
class Event:
    t: float
    pset: ProjectorSet
    mode: str = "partial"
    name: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ReduxonError(f"unknown reduction mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "vndlp" and not self.pset.total:
            raise ReduxonError("vndlp events need a total projector set")
        if self.mode == "partial" and self.pset.total:
            raise ReduxonError("partial events need a projector set with inactive subsystems")


@dataclass(frozen=True, eq=False)
class HistorySchedule:
    initial: DensityOperator
    hamiltonian: Operator
    events: tuple[Event, ...] = ()
    t0: float = 0.0
    t_final: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        lay = self.initial.layout
        if self.hamiltonian.layout != lay:
            raise LayoutError("Hamiltonian layout differs from the initial state")
        times = [self.t0] + [e.t for e in self.events]
        if any(b <= a for a, b in zip(times[1:], times[2:])) or (self.events and self.events[0].t < self.t0):
            raise ReduxonError("event times must be strictly increasing and not before t0")
        if self.t_final is not None and self.t_final < times[-1]:
            raise ReduxonError("t_final precedes the last event")
        for e in self.events:
            if e.pset.layout != lay:
                raise LayoutError(f"event at t={e.t} uses a projector set with a different layout")

    def with_events(self, events: Sequence[Event]) -> "HistorySchedule":
        return HistorySchedule(self.initial, self.hamiltonian, tuple(events), self.t0, self.t_final)


@dataclass(frozen=True, eq=False)
class HistoryRecord:
    weights: list = field(default_factory=list)
    outcomes: Optional[list] = None
    final_state: Optional[DensityOperator] = None
    final: Optional[ReducedState] = None
    states: list = field(default_factory=list, repr=False)


def apply_mixture(rho: DensityOperator, event: Event) -> DensityOperator:
    if event.mode == "lueders":
        return lueders_mix(rho, event.pset)
    if event.mode == "vndlp":
        return vn_hat(rho, event.pset).hat
    return partial_hat(rho, event.pset).hat


def apply_branch(rho: DensityOperator, event: Event, i: int) -> DensityOperator:
    if event.mode == "lueders":
        return lueders_branch(rho, event.pset, i)
    if event.mode == "vndlp":
        return vndlp_branch(event.pset, i)
    return partial_hat(rho, event.pset).branch(i)


def run_history(schedule: HistorySchedule, sample: bool = False, seed=None) -> HistoryRecord:
    """Alternate unitary evolution with reduction events.

    In mixture mode every event replaces the state by its reduced mixture;
    in sampling mode an outcome is drawn from the event weights and the
    run continues from that branch.
    """
    if sample and seed is None:
        raise ReduxonError("sampling needs a seed")
    rng = make_rng(seed) if sample else None
    H = schedule.hamiltonian
    rho, t = schedule.initial, schedule.t0
    ws, outs, states = [], [] if sample else None, []
    last_reduced = None
    for n, ev in enumerate(schedule.events):
        rho = evolve(rho, H, ev.t - t)
        t = ev.t
        w = weights(rho, ev.pset)
        ws.append(w)
        if n == len(schedule.events) - 1:
            last_reduced = reduce(rho, ev.pset)
        if sample:
            i = pick(w, rng.random())
            outs.append(i)
            rho = apply_branch(rho, ev, i)
        else:
            rho = apply_mixture(rho, ev)
        states.append(rho)
    if schedule.t_final is not None:
        rho = evolve(rho, H, schedule.t_final - t)
    return HistoryRecord(ws, outs, rho, last_reduced, states)


def noninterference_defect(schedule: HistorySchedule) -> float:
    """Kolmogorov distance between final-event weights with and without the
    intermediate reductions (applied in mixture mode)."""
    if len(schedule.events) < 2:
        raise ReduxonError("noninterference needs at least one intermediate event")
    final = schedule.events[-1]
    with_inter = run_history(schedule).weights[-1]
    without = run_history(schedule.with_events([final])).weights[-1]
    return float(0.5 * np.sum(np.abs(with_inter - without)))


def stability_defect(rho_a: DensityOperator, pset_a: ProjectorSet, H: Operator, dt: float) -> float:
    """How far the reduced state leaves its equivalence class in time ``dt``.

    ``rho_a`` is reduced with ``pset_a``, evolved for ``dt``, and compared
    with the reduced state at ``t_a`` through the pseudometric over
    ``pset_a``: the largest change of any branch probability.  It vanishes
    at ``dt = 0`` and whenever every projector commutes with ``H``.
    """
    hat_a = reduce(rho_a, pset_a).hat
    if dt == 0:
        return 0.0
    return pseudometric(hat_a, evolve(hat_a, H, dt), pset_a)


@dataclass(frozen=True)
class EnsembleResult:
    frequencies: np.ndarray
    weights: np.ndarray
    counts: np.ndarray
    radii: np.ndarray
    flags: np.ndarray
    M: int

    def as_dict(self) -> dict:
        return {
            "M": self.M,
            "counts": [int(c) for c in self.counts],
            "frequencies": [float(f) for f in self.frequencies],
            "weights": [float(w) for w in self.weights],
            "radii": [float(r) for r in self.radii],
            "flags": [bool(f) for f in self.flags],
            "n_flagged": int(self.flags.sum()),
        }


class _BranchTree:
    """Exact enumeration of all nonzero-weight outcome paths."""

    def __init__(self, schedule: HistorySchedule):
        if not schedule.events:
            raise ReduxonError("ensemble needs at least one event")
        self.schedule = schedule
        self.cumw: dict[tuple[int, ...], np.ndarray] = {}
        self.final_weights = np.zeros(len(schedule.events[-1].pset))
        self._expand((), schedule.initial, schedule.t0, 1.0)

    def _expand(self, path, rho, t, prob):
        ev = self.schedule.events[len(path)]
        rho = evolve(rho, self.schedule.hamiltonian, ev.t - t)
        w = weights(rho, ev.pset)
        self.cumw[path] = w
        if len(self.cumw) > MAX_TREE_NODES:
            raise ReduxonError("history branch tree too large to enumerate")
        last = len(path) + 1 == len(self.schedule.events)
        if last:
            self.final_weights += prob * w
            return
        for i, wi in enumerate(w):
            if wi > ZERO_WEIGHT:
                self._expand(path + (i,), apply_branch(rho, ev, i), ev.t, prob * wi)

    def sample(self, u: np.ndarray) -> int:
        path: tuple[int, ...] = ()
        for k in range(len(self.schedule.events)):
            path = path + (pick(self.cumw[path], u[k]),)
        return path[-1]


def _thread_count(threads: Optional[int]) -> int:
    if threads:
        return int(threads)
    return max(1, int(os.environ.get("REDUXON_THREADS", "1") or 1))


def ensemble_frequencies(schedule: HistorySchedule, M: int, seed: int, threads: Optional[int] = None) -> EnsembleResult:
    """Sample ``M`` independent histories and compare final-outcome
    frequencies with the exact branch-mode weights.

    Run ``j`` draws its uniforms from the seed sequence ``(seed, j)``, so the
    result does not depend on the number of worker threads.  A branch is
    flagged when ``|f_i - w_i|`` exceeds ``4 sqrt(w_i (1 - w_i) / M)``.
    """
    if M < 1:
        raise ReduxonError("M must be positive")
    tree = _BranchTree(schedule)
    n_ev = len(schedule.events)
    n_out = len(tree.final_weights)

    def chunk(start: int) -> np.ndarray:
        counts = np.zeros(n_out, dtype=np.int64)
        for j in range(start, min(start + CHUNK, M)):
            counts[tree.sample(uniform_from_seed([seed, j], n_ev))] += 1
        return counts

    starts = range(0, M, CHUNK)
    with ThreadPoolExecutor(max_workers=_thread_count(threads)) as pool:
        counts = sum(pool.map(chunk, starts))
    w = np.clip(tree.final_weights, 0.0, 1.0)
    f = counts / M
    radii = 4.0 * np.sqrt(np.clip(w * (1.0 - w), 0.0, None) / M)
    # deterministic outcomes must be reproduced exactly
    flags = np.abs(f - w) > radii + 1e-15
    return EnsembleResult(f, w, counts, radii, flags, M)

"""Orthogonal projector sets, compound subsystem projectors, observables and
rotated projector families."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .hilbert import (
    Layout,
    LayoutError,
    Operator,
    ReduxonError,
    embed_subset,
    propagator,
    split_ab,
)

PROJ_TOL = 1e-9


class ProjectorSetError(ReduxonError):
    pass


@dataclass(frozen=True)
class ValidationReport:
    hermiticity: float
    idempotence: float
    orthogonality: float
    completeness: float
    tol: float = PROJ_TOL

    @property
    def passed(self) -> bool:
        return max(self.hermiticity, self.idempotence, self.orthogonality, self.completeness) <= self.tol

    def as_dict(self) -> dict:
        return {
            "hermiticity": self.hermiticity,
            "idempotence": self.idempotence,
            "orthogonality": self.orthogonality,
            "completeness": self.completeness,
            "tol": self.tol,
            "passed": self.passed,
        }


def _matrices(projectors) -> list[np.ndarray]:
    return [p.matrix if isinstance(p, Operator) else np.asarray(p, dtype=complex) for p in projectors]


def check_projectors(mats: Sequence[np.ndarray], tol: float = PROJ_TOL) -> ValidationReport:
    if not mats:
        raise ProjectorSetError("empty projector family")
    d = mats[0].shape[0]
    herm = max(float(np.max(np.abs(p - p.conj().T))) for p in mats)
    idem = max(float(np.max(np.abs(p @ p - p))) for p in mats)
    orth = 0.0
    for i, j in itertools.combinations(range(len(mats)), 2):
        orth = max(orth, float(np.max(np.abs(mats[i] @ mats[j]))))
    comp = float(np.max(np.abs(sum(mats) - np.eye(d))))
    return ValidationReport(herm, idem, orth, comp, tol)


@dataclass(frozen=True, eq=False)
class ProjectorSet:
    """Exhaustive family of orthogonal projectors ``P_i = P_i^A (x) 1_B``.

    ``local`` holds the active-part projectors ``P_i^A`` on the subsystems in
    ``active`` (sorted).  When ``active`` covers every subsystem the set is a
    total reduction and ``P_i^A = P_i``.  ``labels`` keeps the multi-index
    ``(i_1, i_2, ...)`` of compound sets; plain sets use ``(i,)``.
    """

    layout: Layout
    local: tuple[np.ndarray, ...] = field(repr=False)
    active: tuple[int, ...] = ()
    labels: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        active = self.layout.check_subset(self.active) if self.active else tuple(range(self.layout.n))
        object.__setattr__(self, "active", active)
        d_a = prod(self.layout.dims[k] for k in active)
        mats = []
        for p in self.local:
            m = np.array(p.matrix if isinstance(p, Operator) else p, dtype=complex)
            if m.shape != (d_a, d_a):
                raise LayoutError(f"projector shape {m.shape} does not match active dimension {d_a}")
            m.setflags(write=False)
            mats.append(m)
        object.__setattr__(self, "local", tuple(mats))
        labels = tuple(tuple(l) for l in self.labels) or tuple((i,) for i in range(len(mats)))
        if len(labels) != len(mats):
            raise ProjectorSetError("labels do not match projector count")
        object.__setattr__(self, "labels", labels)
        report = check_projectors(mats)
        if not report.passed:
            raise ProjectorSetError(f"projector criteria violated: {report.as_dict()}")

    @classmethod
    def from_projectors(cls, layout: Layout, projectors, active_set: Iterable[int] = ()) -> "ProjectorSet":
        """Build from full-space projectors, recovering ``P_i^A`` and checking
        that each factorizes as ``P_i^A (x) 1_B``."""
        mats = _matrices(projectors)
        active = layout.check_subset(active_set) if active_set else tuple(range(layout.n))
        rest = layout.complement(active)
        if not rest:
            return cls(layout, tuple(mats), active)
        d_b = prod(layout.dims[k] for k in rest)
        local = []
        for m in mats:
            pa = np.einsum("ajbj->ab", split_ab(m, layout, active)) / d_b
            if np.max(np.abs(embed_subset(pa, layout, active) - m)) > PROJ_TOL:
                raise ProjectorSetError("projector does not factorize over the active set")
            local.append(pa)
        return cls(layout, tuple(local), active)

    @property
    def total(self) -> bool:
        return len(self.active) == self.layout.n

    @property
    def inactive(self) -> tuple[int, ...]:
        return self.layout.complement(self.active)

    @property
    def active_layout(self) -> Layout:
        return self.layout.sub(self.active)

    def __len__(self) -> int:
        return len(self.local)

    @cached_property
    def projectors(self) -> tuple[Operator, ...]:
        if self.total:
            return tuple(Operator(self.layout, p) for p in self.local)
        return tuple(Operator(self.layout, embed_subset(p, self.layout, self.active)) for p in self.local)

    @cached_property
    def local_ranks(self) -> tuple[int, ...]:
        """``d_i^A = tr P_i^A``."""
        return tuple(int(round(np.trace(p).real)) for p in self.local)

    @cached_property
    def ranks(self) -> tuple[int, ...]:
        d_b = self.layout.total_dim // self.active_layout.total_dim
        return tuple(r * d_b for r in self.local_ranks)

    def same_as(self, other: "ProjectorSet", tol: float = 1e-12) -> bool:
        if self is other:
            return True
        return (
            self.layout == other.layout
            and self.active == other.active
            and len(self) == len(other)
            and all(np.max(np.abs(a - b)) <= tol for a, b in zip(self.local, other.local))
        )


def validate(pset) -> ValidationReport:
    """Report the worst violation of each projector criterion.

    Accepts a :class:`ProjectorSet` or any sequence of matrices/operators;
    never raises on invalid families.
    """
    if isinstance(pset, ProjectorSet):
        return check_projectors([p.matrix for p in pset.projectors])
    return check_projectors(_matrices(pset))


def is_unitary(u: np.ndarray, tol: float = PROJ_TOL) -> bool:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) <= tol


def basis_partition(layout: Layout, basis, ranks: Sequence[int], active_set: Iterable[int] = ()) -> ProjectorSet:
    """Group consecutive basis columns into blocks of the given sizes.

    ``basis`` is a unitary on the active subsystems (the full space when
    ``active_set`` is empty); block ``i`` spans the next ``ranks[i]``
    columns.
    """
    active = layout.check_subset(active_set) if active_set else tuple(range(layout.n))
    d_a = prod(layout.dims[k] for k in active)
    b = np.asarray(basis.matrix if isinstance(basis, Operator) else basis, dtype=complex)
    if b.shape != (d_a, d_a):
        raise LayoutError(f"basis shape {b.shape} does not match active dimension {d_a}")
    if sum(ranks) != d_a or any(r < 1 for r in ranks):
        raise ProjectorSetError(f"ranks {tuple(ranks)} do not partition dimension {d_a}")
    if not is_unitary(b):
        raise ProjectorSetError("basis is not unitary")
    edges = np.cumsum([0, *ranks])
    local = tuple(b[:, lo:hi] @ b[:, lo:hi].conj().T for lo, hi in zip(edges[:-1], edges[1:]))
    return ProjectorSet(layout, local, active)


@dataclass(frozen=True, eq=False)
class SubsystemPartition:
    """Orthogonal, complete family of projectors on a single subsystem."""

    k: int
    projectors: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        mats = tuple(np.asarray(p, dtype=complex) for p in self.projectors)
        object.__setattr__(self, "projectors", mats)
        report = check_projectors(mats)
        if not report.passed:
            raise ProjectorSetError(f"subsystem {self.k} partition invalid: {report.as_dict()}")

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(int(round(np.trace(p).real)) for p in self.projectors)

    @classmethod
    def from_basis(cls, k: int, basis, ranks: Sequence[int]) -> "SubsystemPartition":
        b = np.asarray(basis, dtype=complex)
        pset = basis_partition(Layout([b.shape[0]]), b, ranks)
        return cls(k, pset.local)


def compound(partitions: Sequence[SubsystemPartition], layout: Layout, active_set: Iterable[int] = ()) -> ProjectorSet:
    """Cartesian product of subsystem partitions over the active set.

    Index ``i`` runs row-major over the tuples ``(i_k)`` for ``k`` in
    ascending order; each tuple is kept in ``labels``.
    """
    ks = [p.k for p in partitions]
    if len(set(ks)) != len(ks):
        raise ProjectorSetError(f"overlapping partitions for subsystems {ks}")
    active = layout.check_subset(active_set) if active_set else tuple(range(layout.n))
    if set(ks) != set(active):
        raise ProjectorSetError(f"partitions cover {sorted(ks)} but active set is {list(active)}")
    by_k = {p.k: p for p in partitions}
    parts = [by_k[k] for k in active]
    for part in parts:
        if part.projectors[0].shape[0] != layout.dims[part.k]:
            raise LayoutError(f"partition for subsystem {part.k} has wrong dimension")
    local, labels = [], []
    for idx in itertools.product(*(range(len(p.projectors)) for p in parts)):
        m = np.ones((1, 1), dtype=complex)
        for part, i in zip(parts, idx):
            m = np.kron(m, part.projectors[i])
        local.append(m)
        labels.append(idx)
    return ProjectorSet(layout, tuple(local), active, tuple(labels))


@dataclass(frozen=True, eq=False)
class Observable:
    pset: ProjectorSet
    eigenvalues: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.eigenvalues)
        object.__setattr__(self, "eigenvalues", vals)
        if len(vals) != len(self.pset):
            raise ProjectorSetError("one eigenvalue per projector required")
        if len(set(vals)) != len(vals):
            raise ProjectorSetError("observable eigenvalues must be distinct; merge projectors instead")


def observable_matrix(obs: Observable) -> Operator:
    """``sum_i lambda_i P_i``."""
    m = sum(lam * p.matrix for lam, p in zip(obs.eigenvalues, obs.pset.projectors))
    return Operator(obs.pset.layout, m)


def gellmann(d: int) -> list[np.ndarray]:
    """Generalized Gell-Mann matrices: symmetric and antisymmetric pairs for
    ``j < k`` first, then the diagonal ones.  For ``d = 2`` this is
    ``(sigma_x, sigma_y, sigma_z)``."""
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1
            a = np.zeros((d, d), dtype=complex)
            a[j, k], a[k, j] = -1j, 1j
            mats.extend([s, a])
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        mats.append(np.diag(diag * np.sqrt(2.0 / (l * (l + 1)))).astype(complex))
    return mats


def n_rotation_params(pset: ProjectorSet) -> int:
    d = pset.active_layout.total_dim
    return d * d - 1


def rotation_unitary(d: int, params: Sequence[float]) -> np.ndarray:
    """``exp(-i sum_a theta_a lambda_a / 2)`` over the Gell-Mann generators."""
    params = np.asarray(params, dtype=float)
    if params.shape != (d * d - 1,):
        raise ProjectorSetError(f"expected {d * d - 1} rotation parameters, got {params.size}")
    gen = sum(t * g for t, g in zip(params, gellmann(d))) / 2 if d > 1 else np.zeros((1, 1))
    return propagator(Operator(Layout([d]), gen), 1.0)


def rotate_family(pset: ProjectorSet, params: Sequence[float]) -> ProjectorSet:
    """Conjugate the active-part projectors by a parametrized unitary."""
    d = pset.active_layout.total_dim
    u = rotation_unitary(d, params)
    local = tuple(u @ p @ u.conj().T for p in pset.local)
    return ProjectorSet(pset.layout, local, pset.active, pset.labels)


def qubit_basis(theta: float, phi: float = 0.0) -> np.ndarray:
    """Columns ``|theta, phi>`` and its orthogonal partner on the Bloch sphere."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    e = np.exp(1j * phi)
    return np.array([[c, -s * np.conj(e)], [s * e, c]], dtype=complex)


def computational_partition(layout: Layout, subsystems: Iterable[int] = ()) -> ProjectorSet:
    """Rank-one projectors onto the computational basis of the given subsystems."""
    active = layout.check_subset(subsystems) if subsystems else tuple(range(layout.n))
    parts = [SubsystemPartition(k, tuple(np.diag(np.eye(layout.dims[k])[i]) for i in range(layout.dims[k]))) for k in active]
    return compound(parts, layout, active)

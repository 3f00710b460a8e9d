"""Trace distance, fidelity and its bounds, projector pseudometrics and the
distance/equality predicates on equivalence classes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hilbert import (
    DensityOperator,
    LayoutError,
    Operator,
    ReduxonError,
    TOL,
    make_rng,
    psd_sqrt,
    random_unitary,
)
from .projector import ProjectorSet, check_projectors
from .reduction import ReducedState, conditional_operators, embed_active

BOUND_SLACK = 1e-9
PURE_TOL = 1e-9


def _same_layout(rho: Operator, sigma: Operator) -> None:
    if rho.layout != sigma.layout:
        raise LayoutError(f"layouts differ: {rho.layout.dims} vs {sigma.layout.dims}")


def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    """``(1/2) tr|rho - sigma|``."""
    _same_layout(rho, sigma)
    evals = np.linalg.eigvalsh(rho.matrix - sigma.matrix)
    return float(min(1.0, 0.5 * np.sum(np.abs(evals))))


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(m)
    # roundoff-level eigenvalues would be amplified by the square root
    floor = 10 * m.shape[0] * np.finfo(float).eps * max(evals[-1], 0.0)
    evals = np.where(evals > floor, evals, 0.0)
    return (vecs * psd_sqrt(evals)) @ vecs.conj().T


def fidelity(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Uhlmann fidelity, computed as the squared nuclear norm of
    ``sqrt(rho) sqrt(sigma)``."""
    _same_layout(rho, sigma)
    s = np.linalg.svd(_sqrtm_psd(rho.matrix) @ _sqrtm_psd(sigma.matrix), compute_uv=False)
    return float(np.clip(np.sum(s) ** 2, 0.0, 1.0))


def is_pure(rho: DensityOperator, tol: float = PURE_TOL) -> bool:
    m = rho.matrix
    return float(np.max(np.abs(m @ m - m))) <= tol


@dataclass(frozen=True)
class DistanceReport:
    value: float
    lower_bound: Optional[float] = None
    upper_bound: Optional[float] = None
    metric_name: str = "trace_distance"

    @property
    def contained(self) -> bool:
        if self.lower_bound is None or self.upper_bound is None:
            return True
        return self.lower_bound - BOUND_SLACK <= self.value <= self.upper_bound + BOUND_SLACK

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "metric_name": self.metric_name,
        }


def bound_check(rho: DensityOperator, sigma: DensityOperator, pure: bool = False) -> DistanceReport:
    """Trace distance with its fidelity bounds.

    ``1 - sqrt(F) <= D <= sqrt(1 - F)`` in general; with ``pure`` set the
    lower bound tightens to ``1 - F``.
    """
    if pure and not is_pure(rho):
        raise ReduxonError("pure flag set but rho is not idempotent")
    d = trace_distance(rho, sigma)
    f = fidelity(rho, sigma)
    lower = 1.0 - f if pure else 1.0 - np.sqrt(f)
    upper = float(np.sqrt(max(0.0, 1.0 - f)))
    return DistanceReport(d, float(lower), upper, "trace_distance_fidelity_bounds")


def _projector_list(qset) -> list[np.ndarray]:
    if isinstance(qset, ProjectorSet):
        return [p.matrix for p in qset.projectors]
    mats = [q.matrix if isinstance(q, Operator) else np.asarray(q, dtype=complex) for q in qset]
    for q in mats:
        rep = check_projectors([q, np.eye(q.shape[0]) - q])
        if rep.hermiticity > TOL.psd or rep.idempotence > TOL.psd:
            raise ReduxonError("pseudometric needs Hermitian idempotent operators")
    return mats


def pseudometric(rho: DensityOperator, sigma: DensityOperator, qset) -> float:
    """``max_{P in Q} |tr[P (rho - sigma)]|`` over an arbitrary projector list."""
    _same_layout(rho, sigma)
    diff = rho.matrix - sigma.matrix
    return float(max(abs(np.vdot(q, diff).real) for q in _projector_list(qset)))


def class_distance(a: ReducedState, b: ReducedState) -> float:
    """Distance between equivalence classes with respect to one projector set.

    Total reductions use the Kolmogorov distance of the weight vectors;
    partial reductions the trace distance between the representatives.
    """
    if not a.pset.same_as(b.pset):
        raise ReduxonError("class distance is only defined for a common projector set")
    if a.total:
        return float(0.5 * np.sum(np.abs(a.weights - b.weights)))
    return trace_distance(a.hat, b.hat)


def default_eq_tol(rho: Operator) -> float:
    return TOL.eq * rho.dim


def class_defect(rho: DensityOperator, sigma: DensityOperator, pset: ProjectorSet) -> float:
    """Largest entry of ``tr_A[(rho - sigma) P_i]`` over all ``i``."""
    _same_layout(rho, sigma)
    diff = Operator(rho.layout, rho.matrix - sigma.matrix)
    return float(max(np.max(np.abs(c)) for c in conditional_operators(diff, pset)))


def class_equal(rho: DensityOperator, sigma: DensityOperator, pset: ProjectorSet, tol: Optional[float] = None) -> bool:
    """Whether ``rho`` and ``sigma`` define the same equivalence class."""
    tol = default_eq_tol(rho) if tol is None else tol
    return class_defect(rho, sigma, pset) <= tol


def block_unitary(pset: ProjectorSet, seed=None) -> np.ndarray:
    """Random unitary on the active space commuting with every ``P_i^A``."""
    rng = make_rng(seed)
    d_a = pset.local[0].shape[0]
    u = np.zeros((d_a, d_a), dtype=complex)
    for p, d in zip(pset.local, pset.local_ranks):
        _, vecs = np.linalg.eigh(0.5 * (p + p.conj().T))
        e = vecs[:, -d:]
        u += e @ random_unitary(d, rng) @ e.conj().T
    return u


def class_member(rho: DensityOperator, pset: ProjectorSet, seed=None) -> DensityOperator:
    """Another member of ``rho``'s class, obtained by conjugation with a
    block-diagonal unitary acting as identity on the inactive subsystems."""
    v = embed_active(pset, block_unitary(pset, seed))
    return DensityOperator(rho.layout, v @ rho.matrix @ v.conj().T)

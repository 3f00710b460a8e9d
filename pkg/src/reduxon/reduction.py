"""Reduction maps: Lüders, von Neumann hat state, vN-DLP branches, partial
reductions with conditional states, and the double-Lüders construction."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .hilbert import (
    DensityOperator,
    LayoutError,
    Operator,
    ReduxonError,
    embed_subset,
    join_ab,
    make_rng,
    partial_trace,
    random_unitary,
    split_ab,
)
from .projector import ProjectorSet

ZERO_WEIGHT = 1e-12
WEIGHT_NEG_TOL = 1e-10
WEIGHT_SUM_TOL = 1e-9


class ZeroWeightError(ReduxonError):
    pass


def _check_layout(rho: Operator, pset: ProjectorSet) -> None:
    if rho.layout != pset.layout:
        raise LayoutError(f"state layout {rho.layout.dims} does not match projector set layout {pset.layout.dims}")


def _clean_weights(w: np.ndarray) -> np.ndarray:
    if np.any(w < -WEIGHT_NEG_TOL):
        raise ReduxonError(f"negative weight {w.min():.3g}")
    w = np.clip(w, 0.0, None)
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ReduxonError(f"weights sum to {w.sum()!r}, expected 1")
    return w


def weights(rho: DensityOperator, pset: ProjectorSet) -> np.ndarray:
    """Born weights ``w_i = tr(rho P_i)``."""
    _check_layout(rho, pset)
    if pset.total:
        marg = rho.matrix
    else:
        marg = partial_trace(rho, pset.inactive).matrix
    w = np.array([np.real(np.vdot(p, marg)) for p in pset.local])
    return _clean_weights(w)


def lueders_branch(rho: DensityOperator, pset: ProjectorSet, i: int) -> DensityOperator:
    """``P_i rho P_i / w_i``."""
    _check_layout(rho, pset)
    p = pset.projectors[i].matrix
    m = p @ rho.matrix @ p
    w = np.trace(m).real
    if w <= ZERO_WEIGHT:
        raise ZeroWeightError(f"branch {i} has weight {w:.3g}; the Lüders state is undefined")
    return DensityOperator(rho.layout, m / w)


def lueders_mix(rho: DensityOperator, pset: ProjectorSet) -> DensityOperator:
    """``sum_i P_i rho P_i``: coherences between branches removed, weights kept."""
    _check_layout(rho, pset)
    m = sum(p.matrix @ rho.matrix @ p.matrix for p in pset.projectors)
    return DensityOperator(rho.layout, m)


@dataclass(frozen=True, eq=False)
class ReducedState:
    """Class representative ``hat = sum_i w_i (P_i^A / d_i^A) (x) rho_i^B``.

    ``conditional[i]`` is the conditional state of the inactive subsystems
    for a partial reduction, or ``None`` when the branch weight is zero or
    the reduction is total.
    """

    pset: ProjectorSet
    weights: np.ndarray
    hat: DensityOperator
    conditional: tuple[Optional[DensityOperator], ...] = field(default=())

    @property
    def total(self) -> bool:
        return self.pset.total

    @property
    def branch_indices(self) -> tuple[int, ...]:
        return tuple(i for i, w in enumerate(self.weights) if w > ZERO_WEIGHT)

    def branch(self, i: int) -> DensityOperator:
        """Normalized branch state ``rho_i`` (``P_i/d_i`` or ``(P_i^A/d_i^A) (x) rho_i^B``)."""
        pset = self.pset
        if pset.total:
            return vndlp_branch(pset, i)
        cond = self.conditional[i]
        if cond is None:
            raise ZeroWeightError(f"branch {i} has zero weight; its conditional state is undefined")
        return _product_branch(pset, i, cond.matrix)

    @cached_property
    def branches(self) -> dict[int, DensityOperator]:
        return {i: self.branch(i) for i in self.branch_indices}


def _product_branch(pset: ProjectorSet, i: int, cond: np.ndarray) -> DensityOperator:
    layout = pset.layout
    pa = pset.local[i] / pset.local_ranks[i]
    t = np.einsum("ab,jk->ajbk", pa, cond)
    return DensityOperator(layout, join_ab(t, layout, pset.active))


def vndlp_branch(pset: ProjectorSet, i: int) -> DensityOperator:
    """Maximally mixed state ``P_i / d_i`` on branch ``i``."""
    if not 0 <= i < len(pset):
        raise IndexError(f"branch index {i} out of range")
    p = pset.projectors[i].matrix
    return DensityOperator(pset.layout, p / pset.ranks[i])


def vn_hat(rho: DensityOperator, pset: ProjectorSet) -> ReducedState:
    """Total reduction ``hat = sum_i (w_i / d_i) P_i``."""
    if not pset.total:
        raise ReduxonError("vn_hat needs a total projector set; use partial_hat")
    w = weights(rho, pset)
    m = sum((wi / d) * p.matrix for wi, d, p in zip(w, pset.ranks, pset.projectors))
    return ReducedState(pset, w, DensityOperator(rho.layout, m), (None,) * len(pset))


def conditional_operators(rho: Operator, pset: ProjectorSet) -> list[np.ndarray]:
    """Unnormalized ``tr_A(P_i rho)`` for every projector, as matrices on B."""
    _check_layout(rho, pset)
    t = split_ab(rho.matrix, pset.layout, pset.active)
    return [np.einsum("ac,cjak->jk", p, t) for p in pset.local]


def partial_hat(rho: DensityOperator, pset: ProjectorSet) -> ReducedState:
    """Partial reduction of the active subsystems with conditional states of the rest."""
    if pset.total:
        raise ReduxonError("partial_hat needs a nonempty inactive set; use vn_hat")
    layout = pset.layout
    cond_ops = conditional_operators(rho, pset)
    w = _clean_weights(np.array([np.trace(c).real for c in cond_ops]))
    blayout = layout.sub(pset.inactive)
    conditional = []
    t = 0
    for pa, d, c, wi in zip(pset.local, pset.local_ranks, cond_ops, w):
        t = t + np.einsum("ab,jk->ajbk", pa / d, c)
        conditional.append(DensityOperator(blayout, c / wi) if wi > ZERO_WEIGHT else None)
    hat = DensityOperator(layout, join_ab(t, layout, pset.active))
    return ReducedState(pset, w, hat, tuple(conditional))


def reduce(rho: DensityOperator, pset: ProjectorSet) -> ReducedState:
    """vN-DLP reduction: :func:`vn_hat` for total sets, :func:`partial_hat` otherwise."""
    return vn_hat(rho, pset) if pset.total else partial_hat(rho, pset)


def _block_bases(pset: ProjectorSet, seed=None) -> list[np.ndarray]:
    """Orthonormal basis (columns) of each active-part block; randomly
    rotated within the block when a seed is given."""
    rng = make_rng(seed) if seed is not None else None
    bases = []
    for p, d in zip(pset.local, pset.local_ranks):
        evals, vecs = np.linalg.eigh(0.5 * (p + p.conj().T))
        e = vecs[:, -d:]
        if rng is not None and d > 1:
            e = e @ random_unitary(d, rng)
        bases.append(e)
    return bases


def _dephase_rank_one(t: np.ndarray, vectors: list[np.ndarray]) -> np.ndarray:
    """``sum_v (|v><v| (x) 1) rho (|v><v| (x) 1)`` on the split tensor."""
    out = np.zeros_like(t)
    for v in vectors:
        p = np.outer(v, v.conj())
        out += np.einsum("ac,cjek,eb->ajbk", p, t, p)
    return out


def double_lueders(rho: DensityOperator, pset: ProjectorSet, seed=None) -> DensityOperator:
    """Two successive rank-one Lüders mixes that reproduce the vN-DLP state.

    Inside each active block, the first pass uses an orthonormal basis
    ``e_mu`` and the second a discrete-Fourier basis built from it
    (mutually unbiased with ``e_mu``).  ``seed`` randomizes the choice of
    ``e_mu`` within each block.
    """
    _check_layout(rho, pset)
    layout = pset.layout
    bases = _block_bases(pset, seed)
    first = [e[:, mu] for e in bases for mu in range(e.shape[1])]
    second = []
    for e in bases:
        d = e.shape[1]
        dft = np.exp(2j * np.pi * np.outer(np.arange(d), np.arange(d)) / d) / np.sqrt(d)
        f = e @ dft
        second.extend(f[:, b] for b in range(d))
    if pset.total:
        t = rho.matrix.reshape(rho.dim, 1, rho.dim, 1)
        t = _dephase_rank_one(_dephase_rank_one(t, first), second)
        return DensityOperator(layout, t.reshape(rho.dim, rho.dim))
    t = split_ab(rho.matrix, layout, pset.active)
    t = _dephase_rank_one(_dephase_rank_one(t, first), second)
    return DensityOperator(layout, join_ab(t, layout, pset.active))


def uniform_from_seed(seed, n: int = 1) -> np.ndarray:
    """``n`` doubles in ``[0, 1)`` from a counter-free seed derivation."""
    words = np.random.SeedSequence(seed).generate_state(n, np.uint64)
    return (words >> np.uint64(11)).astype(float) * 2.0**-53


def pick(weights_: np.ndarray, u: float) -> int:
    """Inverse-CDF selection; zero-weight entries are never chosen."""
    cw = np.cumsum(weights_)
    i = int(np.searchsorted(cw, u * cw[-1], side="right"))
    return min(i, len(cw) - 1)


def sample_outcome(weights_, seed) -> int:
    """Draw a branch index with probability ``w_i``."""
    w = _clean_weights(np.asarray(weights_, dtype=float))
    if isinstance(seed, np.random.Generator):
        u = seed.random()
    else:
        u = uniform_from_seed(seed)[0]
    return pick(w, u)


def embed_active(pset: ProjectorSet, op: np.ndarray) -> np.ndarray:
    return op if pset.total else embed_subset(op, pset.layout, pset.active)

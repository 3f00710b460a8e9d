"""Von Neumann entropy and the entropy-generation predictability sieve."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .hilbert import DensityOperator, Operator, ReduxonError, evolve, xlnx
from .projector import ProjectorSet, n_rotation_params, rotate_family
from .reduction import ZERO_WEIGHT, reduce

log = logging.getLogger(__name__)

FORM_AGREEMENT_TOL = 1e-10


def entropy(rho: DensityOperator) -> float:
    """``-tr(rho ln rho)`` with ``0 ln 0 = 0``."""
    evals = np.linalg.eigvalsh(rho.matrix)
    return float(max(0.0, -np.sum(xlnx(evals))))


@dataclass(frozen=True, eq=False)
class SieveConfig:
    """Sieve window and candidate family.

    Candidates come either from ``candidates`` (searched exhaustively) or
    from rotations of ``reference``: every parameter vector in ``grid`` is
    evaluated, then, if ``budget > 0``, a Nelder-Mead search starts from
    the best grid point (or ``x0``) with at most ``budget`` evaluations.
    """

    hamiltonian: Operator
    dt: float
    candidates: tuple[ProjectorSet, ...] = ()
    reference: Optional[ProjectorSet] = None
    grid: tuple[tuple[float, ...], ...] = ()
    budget: int = 0
    x0: Optional[tuple[float, ...]] = None
    xatol: float = 1e-6
    fatol: float = 1e-12
    threads: Optional[int] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ReduxonError("sieve window dt must be positive")
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "grid", tuple(tuple(float(x) for x in p) for p in self.grid))
        if not self.candidates and self.reference is None:
            raise ReduxonError("sieve needs explicit candidates or a reference set to rotate")
        if self.reference is not None and not self.grid and self.budget <= 0:
            raise ReduxonError("rotation family needs a parameter grid or an optimizer budget")


@dataclass(frozen=True)
class SieveTerms:
    G: float
    G_after: float
    weights: np.ndarray
    transition: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class SieveResult:
    best_pset: ProjectorSet
    best_G: float
    best_index: int
    landscape: list = field(default_factory=list)


def sieve_terms(rho_a: DensityOperator, pset: ProjectorSet, hamiltonian: Operator, dt: float) -> SieveTerms:
    """Evaluate the entropy-generation functional in both of its forms.

    Each branch ``rho_i(t_a)`` of the reduced state is evolved for ``dt``
    and reduced again with the same projector set.  ``G`` uses the entropy
    at ``t_a``, ``G_after`` the entropy of the evolved branch.  The
    returned transition matrix holds the second-reduction weights
    ``tr[P_j rho_i(t_b)]`` (rows indexed by first-reduction branch).
    """
    if not hamiltonian.is_hermitian():
        raise ReduxonError("Hamiltonian is not Hermitian")
    red = reduce(rho_a, pset)
    n = len(pset)
    g_a = g_b = 0.0
    trans = np.zeros((n, n))
    for i in red.branch_indices:
        w = red.weights[i]
        branch = red.branch(i)
        moved = evolve(branch, hamiltonian, dt)
        again = reduce(moved, pset)
        s_hat = entropy(again.hat)
        g_a += w * (s_hat - entropy(branch))
        g_b += w * (s_hat - entropy(moved))
        trans[i] = again.weights
    return SieveTerms(float(g_a), float(g_b), red.weights, trans)


def sieve_G(rho_a: DensityOperator, pset: ProjectorSet, config: SieveConfig) -> float:
    """Mean entropy generated by a second reduction after ``config.dt``."""
    terms = sieve_terms(rho_a, pset, config.hamiltonian, config.dt)
    if abs(terms.G - terms.G_after) > FORM_AGREEMENT_TOL:
        log.warning("sieve functional forms disagree by %.3g", abs(terms.G - terms.G_after))
    return terms.G


def _threads(config: SieveConfig) -> int:
    if config.threads:
        return config.threads
    return int(os.environ.get("REDUXON_THREADS", "1") or 1)


def sieve_search(rho_a: DensityOperator, config: SieveConfig) -> SieveResult:
    """Minimize the functional over the configured candidate family.

    The landscape lists ``(key, G)`` pairs in evaluation order; keys are
    candidate indices for explicit lists and parameter tuples for rotation
    families.  Ties go to the earliest entry.
    """
    entries: list[tuple[object, ProjectorSet]] = []
    if config.candidates:
        entries.extend((i, p) for i, p in enumerate(config.candidates))
    if config.reference is not None:
        entries.extend((params, rotate_family(config.reference, params)) for params in config.grid)

    def g_of(pset):
        return sieve_G(rho_a, pset, config)

    with ThreadPoolExecutor(max_workers=_threads(config)) as pool:
        values = list(pool.map(lambda e: g_of(e[1]), entries))
    landscape = [(key, g) for (key, _), g in zip(entries, values)]
    psets = [p for _, p in entries]

    if config.reference is not None and config.budget > 0:
        if config.x0 is not None:
            x0 = np.asarray(config.x0, dtype=float)
        elif config.grid:
            grid_vals = values[len(config.candidates):]
            x0 = np.asarray(config.grid[int(np.argmin(grid_vals))])
        else:
            x0 = np.zeros(n_rotation_params(config.reference))

        def objective(x):
            p = rotate_family(config.reference, x)
            g = g_of(p)
            landscape.append((tuple(float(v) for v in x), g))
            psets.append(p)
            return g

        minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"maxfev": config.budget, "xatol": config.xatol, "fatol": config.fatol},
        )

    if not landscape:
        raise ReduxonError("empty candidate family")
    gs = np.array([g for _, g in landscape])
    best = int(np.argmin(gs))
    return SieveResult(psets[best], float(gs[best]), best, landscape)


def transition_concentration(terms: SieveTerms) -> float:
    """Weight-averaged largest second-reduction probability per branch."""
    rows = [i for i, w in enumerate(terms.weights) if w > ZERO_WEIGHT]
    return float(sum(terms.weights[i] * terms.transition[i].max() for i in rows))


__all__ = [
    "entropy",
    "SieveConfig",
    "SieveResult",
    "SieveTerms",
    "sieve_terms",
    "sieve_G",
    "sieve_search",
    "transition_concentration",
]

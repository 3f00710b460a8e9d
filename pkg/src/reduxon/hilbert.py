"""Tensor-product spaces, dense operators, partial traces and Hermitian
matrix functions.

All operators are dense complex matrices tagged with a :class:`Layout`
(the ordered subsystem dimensions).  Values are immutable; every function
returns a new object.  Units follow hbar = 1.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from math import prod
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_DIM = 1024
_ROUNDOFF = 16 * np.finfo(float).eps


class ReduxonError(ValueError):
    """Base class for invalid inputs and invariant violations."""


class LayoutError(ReduxonError):
    pass


class InvalidStateError(ReduxonError):
    pass


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-10
    psd: float = 1e-9
    trace: float = 1e-9
    eq: float = 1e-9

    def __post_init__(self):
        for name in ("herm", "psd", "trace", "eq"):
            if getattr(self, name) < 0:
                raise ValueError(f"tolerance {name} must be nonnegative")


TOL = Tolerances()


@dataclass(frozen=True)
class Layout:
    """Ordered subsystem dimensions of a tensor-product Hilbert space."""

    dims: tuple[int, ...]

    def __init__(self, dims: Iterable[int]):
        dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in dims):
            raise LayoutError(f"subsystem dimensions must be >= 1, got {dims}")
        if prod(dims) > MAX_DIM:
            raise LayoutError(f"total dimension {prod(dims)} exceeds the dense limit {MAX_DIM}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    @property
    def n(self) -> int:
        return len(self.dims)

    def check_subset(self, subset: Iterable[int]) -> tuple[int, ...]:
        subset = tuple(sorted(set(int(k) for k in subset)))
        for k in subset:
            if not 0 <= k < self.n:
                raise LayoutError(f"subsystem index {k} out of range for {self.n} subsystems")
        return subset

    def complement(self, subset: Iterable[int]) -> tuple[int, ...]:
        subset = set(self.check_subset(subset))
        return tuple(k for k in range(self.n) if k not in subset)

    def sub(self, subset: Iterable[int]) -> "Layout":
        return Layout(self.dims[k] for k in self.check_subset(subset))

    def __add__(self, other: "Layout") -> "Layout":
        return Layout(self.dims + other.dims)


def _as_matrix(matrix, dim: int) -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    if m.ndim != 2 or m.shape != (dim, dim):
        raise LayoutError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Operator:
    """A dense operator on the space described by ``layout``."""

    layout: Layout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not isinstance(self.layout, Layout):
            object.__setattr__(self, "layout", Layout(self.layout))
        object.__setattr__(self, "matrix", _as_matrix(self.matrix, self.layout.total_dim))

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def dag(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def herm_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def is_hermitian(self, tol: float = TOL.herm) -> bool:
        return self.herm_error() <= tol


@dataclass(frozen=True, eq=False)
class DensityOperator(Operator):
    """Hermitian, positive semidefinite, unit-trace operator.

    Eigenvalues in ``[-tol.psd, 0)`` are clipped to zero (and the trace
    renormalized); anything more negative is rejected.
    """

    def __post_init__(self):
        super().__post_init__()
        m = self.matrix
        if self.herm_error() > TOL.herm:
            raise InvalidStateError(f"density operator not Hermitian (error {self.herm_error():.3g})")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > TOL.trace:
            raise InvalidStateError(f"density operator trace is {tr!r}, expected 1")
        lowest = np.linalg.eigvalsh(m)[0]
        if lowest < -TOL.psd:
            raise InvalidStateError(f"density operator has eigenvalue {lowest:.3g} < 0")
        # negatives at the roundoff scale are left alone; clipping them would
        # cost a full eigendecomposition and change nothing measurable
        if lowest < -_ROUNDOFF * self.dim:
            evals, vecs = np.linalg.eigh(m)
            evals = np.clip(evals, 0.0, None)
            m = (vecs * evals) @ vecs.conj().T
            m = m / np.trace(m).real
        object.__setattr__(self, "matrix", _as_matrix(m, self.dim))

    @classmethod
    def _conjugated(cls, rho: "DensityOperator", u: np.ndarray) -> "DensityOperator":
        """``u rho u^dagger`` for unitary ``u``; the spectrum is inherited from
        ``rho``, so only Hermiticity is restored."""
        m = u @ rho.matrix @ u.conj().T
        out = object.__new__(cls)
        object.__setattr__(out, "layout", rho.layout)
        object.__setattr__(out, "matrix", _as_matrix(0.5 * (m + m.conj().T), rho.dim))
        return out

    @classmethod
    def from_ket(cls, layout: Layout | Sequence[int], ket) -> "DensityOperator":
        ket = np.asarray(ket, dtype=complex).ravel()
        ket = ket / np.linalg.norm(ket)
        return cls(Layout(layout) if not isinstance(layout, Layout) else layout, np.outer(ket, ket.conj()))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))


def operator(layout, matrix) -> Operator:
    return Operator(layout if isinstance(layout, Layout) else Layout(layout), matrix)


def identity(layout: Layout | int | Sequence[int]) -> Operator:
    if isinstance(layout, int):
        layout = Layout([layout])
    elif not isinstance(layout, Layout):
        layout = Layout(layout)
    return Operator(layout, np.eye(layout.total_dim))


def maximally_mixed(layout: Layout) -> DensityOperator:
    return DensityOperator(layout, np.eye(layout.total_dim) / layout.total_dim)


def _same_kind(a: Operator, b: Operator, layout: Layout, matrix) -> Operator:
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(layout, matrix)
    return Operator(layout, matrix)


def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product with concatenated layout."""
    return _same_kind(a, b, a.layout + b.layout, np.kron(a.matrix, b.matrix))


def permute_subsystems(matrix: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: output factor ``j`` is input factor ``order[j]``."""
    dims = tuple(dims)
    n = len(dims)
    if tuple(order) == tuple(range(n)):
        return matrix
    t = matrix.reshape(dims + dims)
    t = t.transpose(list(order) + [n + k for k in order])
    d = prod(dims)
    return t.reshape(d, d)


def embed_subset(op: np.ndarray | Operator, layout: Layout, subset: Sequence[int]) -> np.ndarray:
    """Extend an operator on the (sorted) subsystems ``subset`` by identities."""
    subset = layout.check_subset(subset)
    m = op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    d_a = prod(layout.dims[k] for k in subset)
    if m.shape != (d_a, d_a):
        raise LayoutError(f"operator shape {m.shape} does not match subsystems {subset} (dim {d_a})")
    rest = layout.complement(subset)
    d_b = prod(layout.dims[k] for k in rest)
    full = np.kron(m, np.eye(d_b))
    order = list(subset) + list(rest)
    cur_dims = [layout.dims[k] for k in order]
    return permute_subsystems(full, cur_dims, np.argsort(order))


def embed(op_k: Operator | np.ndarray, layout: Layout, k: int) -> Operator:
    """Place ``op_k`` on subsystem ``k`` with identities elsewhere."""
    if not 0 <= k < layout.n:
        raise LayoutError(f"subsystem index {k} out of range")
    return Operator(layout, embed_subset(op_k, layout, [k]))


def split_ab(matrix: np.ndarray, layout: Layout, subset: Sequence[int]) -> np.ndarray:
    """View ``matrix`` as a rank-4 tensor ``[a, j, b, k]`` with ``a, b`` over
    ``subset`` and ``j, k`` over the complement."""
    subset = layout.check_subset(subset)
    rest = layout.complement(subset)
    order = list(subset) + list(rest)
    m = permute_subsystems(matrix, layout.dims, order)
    d_a = prod(layout.dims[k] for k in subset)
    d_b = prod(layout.dims[k] for k in rest)
    return m.reshape(d_a, d_b, d_a, d_b)


def join_ab(tensor4: np.ndarray, layout: Layout, subset: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`split_ab`."""
    subset = layout.check_subset(subset)
    rest = layout.complement(subset)
    order = list(subset) + list(rest)
    d = layout.total_dim
    cur_dims = [layout.dims[k] for k in order]
    return permute_subsystems(tensor4.reshape(d, d), cur_dims, np.argsort(order))


def partial_trace(op: Operator, subset: Iterable[int]) -> Operator:
    """Trace out the subsystems in ``subset``.

    The result lives on the complementary layout (kept in original order).
    Tracing out everything gives a 1x1 operator holding ``tr(op)``.
    Density operators map to density operators.
    """
    layout = op.layout
    traced = layout.check_subset(subset)
    keep = layout.complement(traced)
    t = split_ab(op.matrix, layout, keep)
    reduced = np.einsum("ajbj->ab", t)
    cls = DensityOperator if isinstance(op, DensityOperator) else Operator
    return cls(layout.sub(keep), reduced)


def _check_hermitian(op: Operator, what: str = "operator") -> None:
    if not op.is_hermitian():
        raise ReduxonError(f"{what} is not Hermitian (error {op.herm_error():.3g})")


def eigh(op: Operator) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvectors of a Hermitian operator."""
    _check_hermitian(op)
    m = op.matrix
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def herm_fn(op: Operator, fn: Callable[[np.ndarray], np.ndarray]) -> Operator:
    """Apply a scalar function to the spectrum of a Hermitian operator."""
    evals, vecs = eigh(op)
    vals = np.asarray(fn(evals))
    return Operator(op.layout, (vecs * vals) @ vecs.conj().T)


def xlnx(x: np.ndarray) -> np.ndarray:
    """``x ln x`` with the convention ``0 ln 0 = 0`` (negative roundoff treated as 0)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def psd_sqrt(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(x, 0.0, None))


# Operator matrices are read-only, so a spectrum stays valid for the
# lifetime of its Hamiltonian; repeated evolutions reuse it.
_SPECTRA: "weakref.WeakKeyDictionary[Operator, tuple]" = weakref.WeakKeyDictionary()


def _spectrum(H: Operator) -> tuple[np.ndarray, np.ndarray]:
    cached = _SPECTRA.get(H)
    if cached is None:
        cached = eigh(H)
        _SPECTRA[H] = cached
    return cached


def propagator(H: Operator, dt: float) -> np.ndarray:
    """``exp(-i H dt)`` via Hermitian eigendecomposition."""
    evals, vecs = _spectrum(H)
    return (vecs * np.exp(-1j * evals * dt)) @ vecs.conj().T


def evolve(rho: DensityOperator, H: Operator, dt: float) -> DensityOperator:
    """Unitary evolution ``U rho U^dagger`` with ``U = exp(-i H dt)``."""
    if H.layout != rho.layout:
        raise LayoutError("Hamiltonian and state layouts differ")
    _check_hermitian(H, "Hamiltonian")
    if dt == 0:
        return rho
    return DensityOperator._conjugated(rho, propagator(H, dt))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_unitary(d: int, seed=None) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    rng = make_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_state(layout: Layout | Sequence[int], rank: int = 1, seed=None) -> DensityOperator:
    """Random density operator of the given rank.

    ``rank == 1`` gives a Haar-random pure state; larger ranks give a
    normalized Wishart matrix ``G G^dagger / tr(G G^dagger)`` with ``G`` a
    ``d x rank`` Ginibre matrix.
    """
    layout = layout if isinstance(layout, Layout) else Layout(layout)
    d = layout.total_dim
    if not 1 <= rank <= d:
        raise ReduxonError(f"rank must lie in [1, {d}], got {rank}")
    rng = make_rng(seed)
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    if rank == 1:
        return DensityOperator.from_ket(layout, g[:, 0])
    w = g @ g.conj().T
    return DensityOperator(layout, w / np.trace(w).real)


SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

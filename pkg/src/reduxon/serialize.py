"""JSON forms of operators, projector sets and reduced states, plus a
deterministic writer (floats with 17 significant digits)."""
from __future__ import annotations

import hashlib
import json
import math
from typing import Any, Optional

import numpy as np

from .hilbert import DensityOperator, Layout, Operator, ReduxonError
from .projector import ProjectorSet, basis_partition, qubit_basis
from .reduction import ReducedState


class SchemaError(ReduxonError):
    """Malformed JSON input (as opposed to an invariant violation)."""


def operator_to_json(op: Operator) -> dict:
    m = op.matrix
    return {"dims": list(op.layout.dims), "re": m.real.tolist(), "im": m.imag.tolist()}


def operator_from_json(obj: dict, density: bool = False) -> Operator:
    if not isinstance(obj, dict) or not {"dims", "re"} <= set(obj):
        raise SchemaError("operator JSON needs 'dims' and 're' (and optionally 'im')")
    extra = set(obj) - {"dims", "re", "im"}
    if extra:
        raise SchemaError(f"unknown operator fields: {sorted(extra)}")
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape:
        raise SchemaError("operator 're' and 'im' shapes differ")
    cls = DensityOperator if density else Operator
    return cls(Layout(obj["dims"]), re + 1j * im)


def pset_to_json(pset: ProjectorSet) -> dict:
    return {
        "layout": list(pset.layout.dims),
        "active_set": list(pset.active),
        "labels": [list(l) for l in pset.labels],
        "projectors": [operator_to_json(p) for p in pset.projectors],
    }


_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _named_basis(name: str, d: int) -> np.ndarray:
    if name in ("z", "computational", "identity"):
        return np.eye(d, dtype=complex)
    if d == 2 and name in ("x", "hadamard"):
        return _HADAMARD
    if d == 2 and name == "y":
        return qubit_basis(np.pi / 2, np.pi / 2)
    if name == "fourier":
        k = np.arange(d)
        return np.exp(2j * np.pi * np.outer(k, k) / d) / np.sqrt(d)
    raise SchemaError(f"unknown basis name {name!r} for dimension {d}")


def pset_from_json(obj: dict, layout: Optional[Layout] = None) -> ProjectorSet:
    """Parse either the full form ``{layout, active_set, projectors}`` or the
    basis form ``{layout, active_set, basis, ranks}``.

    ``basis`` may be an operator JSON, a name (``z``, ``x``, ``y``,
    ``fourier``) or ``{"theta": .., "phi": ..}`` for a single qubit.
    """
    if not isinstance(obj, dict):
        raise SchemaError("projector set must be a JSON object")
    allowed = {"layout", "active_set", "labels", "projectors", "basis", "ranks"}
    extra = set(obj) - allowed
    if extra:
        raise SchemaError(f"unknown projector-set fields: {sorted(extra)}")
    if "layout" in obj:
        layout = Layout(obj["layout"])
    if layout is None:
        raise SchemaError("projector set needs a 'layout'")
    active = tuple(obj.get("active_set", ()))
    if "projectors" in obj:
        mats = [operator_from_json(p).matrix for p in obj["projectors"]]
        pset = ProjectorSet.from_projectors(layout, mats, active)
        if "labels" in obj:
            pset = ProjectorSet(layout, pset.local, pset.active, tuple(tuple(l) for l in obj["labels"]))
        return pset
    if "basis" not in obj:
        raise SchemaError("projector set needs 'projectors' or 'basis'")
    d_a = layout.sub(active).total_dim if active else layout.total_dim
    basis = obj["basis"]
    if isinstance(basis, str):
        b = _named_basis(basis, d_a)
    elif isinstance(basis, dict) and "theta" in basis:
        if d_a != 2:
            raise SchemaError("theta/phi bases are only defined for a single qubit")
        b = qubit_basis(float(basis["theta"]), float(basis.get("phi", 0.0)))
    else:
        b = operator_from_json(basis).matrix
    ranks = obj.get("ranks") or [1] * d_a
    return basis_partition(layout, b, ranks, active)


def reduced_to_json(red: ReducedState) -> dict:
    return {
        "weights": [float(w) for w in red.weights],
        "branch_indices": list(red.branch_indices),
        "hat": operator_to_json(red.hat),
        "conditional_states": [None if c is None else operator_to_json(c) for c in red.conditional],
    }


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = "%.17g" % x
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, bool, np.number)) or v is None for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 1) -> str:
    """Deterministic JSON text; floats use ``%.17g``."""
    return _encode(obj, indent, 0) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(dumps(config, indent=0).encode()).hexdigest()


__all__ = [
    "SchemaError",
    "operator_to_json",
    "operator_from_json",
    "pset_to_json",
    "pset_from_json",
    "reduced_to_json",
    "dumps",
    "config_hash",
]

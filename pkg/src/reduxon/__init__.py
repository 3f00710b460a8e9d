"""Quantum-state reduction toolkit: Lüders and vN-DLP reductions,
equivalence-class representatives, distances, entropy sieve and
reduction histories on dense finite-dimensional spaces."""

__version__ = "0.1.0"

from .hilbert import (
    DensityOperator,
    InvalidStateError,
    Layout,
    LayoutError,
    Operator,
    ReduxonError,
    Tolerances,
    embed,
    evolve,
    herm_fn,
    identity,
    partial_trace,
    random_state,
    random_unitary,
    tensor,
)
from .projector import (
    Observable,
    ProjectorSet,
    ProjectorSetError,
    SubsystemPartition,
    basis_partition,
    compound,
    observable_matrix,
    rotate_family,
    validate,
)
from .reduction import (
    ReducedState,
    ZeroWeightError,
    double_lueders,
    lueders_branch,
    lueders_mix,
    partial_hat,
    reduce,
    sample_outcome,
    vn_hat,
    vndlp_branch,
    weights,
)
from .metrics import (
    DistanceReport,
    bound_check,
    class_distance,
    class_equal,
    class_member,
    fidelity,
    pseudometric,
    trace_distance,
)
from .sieve import SieveConfig, SieveResult, entropy, sieve_G, sieve_search
from .dynamics import (
    Event,
    HistorySchedule,
    build_dephasing,
    build_pointer,
    dephasing_factor,
    ensemble_frequencies,
    noninterference_defect,
    run_history,
    stability_defect,
)

__all__ = [
    "__version__",
    "DensityOperator",
    "InvalidStateError",
    "Layout",
    "LayoutError",
    "Operator",
    "ReduxonError",
    "Tolerances",
    "embed",
    "evolve",
    "herm_fn",
    "identity",
    "partial_trace",
    "random_state",
    "random_unitary",
    "tensor",
    "Observable",
    "ProjectorSet",
    "ProjectorSetError",
    "SubsystemPartition",
    "basis_partition",
    "compound",
    "observable_matrix",
    "rotate_family",
    "validate",
    "ReducedState",
    "ZeroWeightError",
    "double_lueders",
    "lueders_branch",
    "lueders_mix",
    "partial_hat",
    "reduce",
    "sample_outcome",
    "vn_hat",
    "vndlp_branch",
    "weights",
    "DistanceReport",
    "bound_check",
    "class_distance",
    "class_equal",
    "class_member",
    "fidelity",
    "pseudometric",
    "trace_distance",
    "Event",
    "HistorySchedule",
    "build_dephasing",
    "build_pointer",
    "dephasing_factor",
    "ensemble_frequencies",
    "noninterference_defect",
    "run_history",
    "stability_defect",
    "SieveConfig",
    "SieveResult",
    "entropy",
    "sieve_G",
    "sieve_search",
]

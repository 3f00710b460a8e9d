"""Experiment configurations and runners behind the command-line tool.

Every runner takes a parsed config model and returns ``(payload, rows, ok)``:
a JSON-ready result, CSV rows (first row is the header) and whether all
checked invariants held.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .dynamics import (
    DephasingModel,
    Event,
    HistorySchedule,
    PointerModel,
    build_dephasing,
    build_pointer,
    dephasing_factor,
    ensemble_frequencies,
    noninterference_defect,
    run_history,
    stability_defect,
)
from .hilbert import Layout, Operator, random_state, random_unitary
from .metrics import (
    bound_check,
    class_distance,
    class_equal,
    fidelity,
    pseudometric,
    trace_distance,
)
from .projector import basis_partition, validate
from .reduction import ZERO_WEIGHT, double_lueders, lueders_branch, lueders_mix, reduce, weights
from .serialize import (
    SchemaError,
    config_hash,
    operator_from_json,
    operator_to_json,
    pset_from_json,
    pset_to_json,
    reduced_to_json,
)
from .sieve import SieveConfig, sieve_search, sieve_terms, transition_concentration

KINDS = ("validate", "reduce", "distance", "sieve", "history", "ensemble", "bounds-suite", "accept")
STOCHASTIC = {"ensemble", "bounds-suite"}
IDENTITY_TOL = 1e-10


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Common(Strict):
    kind: Optional[str] = None
    seed: Optional[int] = None
    out: Optional[str] = None
    format: Literal["json", "csv"] = "json"


class ModelSpec(Strict):
    kind: Literal["dephasing", "pointer", "custom"] = "dephasing"
    n_env: int = 1
    couplings: Optional[list[float]] = None
    coupling_seed: Optional[int] = None
    kick: float = 1.0
    hamiltonian: Optional[dict] = None
    alpha: tuple[float, float] = (2**-0.5, 0.0)
    beta: tuple[float, float] = (2**-0.5, 0.0)


class EventSpec(Strict):
    t: float
    pset_ref: str
    mode: Literal["lueders", "vndlp", "partial"] = "partial"


class TimeseriesSpec(Strict):
    t_max: float
    n: int = Field(default=50, ge=2)


class ScheduleSpec(Common):
    model: ModelSpec
    initial: Optional[dict] = None
    psets: dict[str, dict] = {}
    events: list[EventSpec] = []
    t0: float = 0.0
    t_final: Optional[float] = None


class HistoryConfig(ScheduleSpec):
    sample: bool = False
    timeseries: Optional[TimeseriesSpec] = None


class EnsembleConfig(ScheduleSpec):
    M: int = Field(default=100_000, ge=1)


class ValidateConfig(Common):
    pset: Optional[dict] = None
    projectors: Optional[list[dict]] = None
    state: Optional[dict] = None


class ReduceConfig(Common):
    state: dict
    pset: dict
    double_lueders: bool = False


class DistanceConfig(Common):
    rho: dict
    sigma: dict
    metric: Literal["trace", "fidelity", "bounds", "pseudometric", "class"] = "trace"
    pure: bool = False
    qset: Optional[Union[list[dict], dict]] = None
    pset: Optional[dict] = None


class ThetaGrid(Strict):
    start: float = 0.0
    stop: float = float(np.pi / 2)
    n: int = Field(default=10, ge=1)


class SieveSpec(Common):
    model: Optional[ModelSpec] = None
    hamiltonian: Optional[dict] = None
    state: Optional[dict] = None
    dt: float
    candidates: list[Union[dict, str]] = []
    reference: Optional[Union[dict, str]] = None
    grid: list[list[float]] = []
    theta_grid: Optional[ThetaGrid] = None
    budget: int = 0
    x0: Optional[list[float]] = None


class BoundsConfig(Common):
    trials: int = Field(default=1000, ge=1)
    dims: list[int] = [4, 8, 16]


class AcceptConfig(Common):
    only: Optional[list[int]] = None


SCHEMAS = {
    "validate": ValidateConfig,
    "reduce": ReduceConfig,
    "distance": DistanceConfig,
    "sieve": SieveSpec,
    "history": HistoryConfig,
    "ensemble": EnsembleConfig,
    "bounds-suite": BoundsConfig,
    "accept": AcceptConfig,
}


def thread_count(threads: Optional[int] = None) -> int:
    if threads:
        return int(threads)
    return max(1, int(os.environ.get("REDUXON_THREADS", "1") or 1))


def envelope(kind: str, config: Strict, result: dict) -> dict:
    cfg = config.model_dump(exclude={"out", "format"})
    return {"kind": kind, "version": __version__, "config_hash": config_hash(cfg), "result": result}


def build_model(spec: ModelSpec):
    if spec.kind == "dephasing":
        return build_dephasing(spec.n_env, spec.couplings, spec.coupling_seed)
    if spec.kind == "pointer":
        return build_pointer(spec.n_env, spec.kick, spec.couplings, spec.coupling_seed)
    if spec.hamiltonian is None:
        raise SchemaError("custom model needs a 'hamiltonian'")
    return operator_from_json(spec.hamiltonian)


def _model_parts(spec: ModelSpec, initial: Optional[dict]):
    model = build_model(spec)
    if isinstance(model, Operator):
        H, layout = model, model.layout
        if initial is None:
            raise SchemaError("custom model needs an 'initial' state")
    else:
        H, layout = model.hamiltonian, model.layout
    if initial is not None:
        rho = operator_from_json(initial, density=True)
    elif isinstance(model, DephasingModel):
        rho = model.initial_state(complex(*spec.alpha), complex(*spec.beta))
    else:
        rho = model.initial_state()
    return model, H, layout, rho


def builtin_psets(model) -> dict:
    if isinstance(model, DephasingModel):
        return {"system_z": model.system_pset(0.0), "system_x": model.system_pset(np.pi / 2)}
    if isinstance(model, PointerModel):
        lay = model.layout
        return {
            "pointer": model.pointer_pset(),
            "system_z": basis_partition(lay, np.eye(2), (1, 1), active_set=[0]),
        }
    return {}


def _resolve_psets(named: dict, model, layout: Layout) -> dict:
    table = builtin_psets(model)
    for name, obj in named.items():
        table[name] = pset_from_json(obj, layout)
    return table


def build_schedule(cfg: ScheduleSpec):
    model, H, layout, rho = _model_parts(cfg.model, cfg.initial)
    table = _resolve_psets(cfg.psets, model, layout)
    events = []
    for ev in cfg.events:
        if ev.pset_ref not in table:
            raise SchemaError(f"unknown pset_ref {ev.pset_ref!r}; known: {sorted(table)}")
        events.append(Event(ev.t, table[ev.pset_ref], ev.mode, ev.pset_ref))
    return model, HistorySchedule(rho, H, tuple(events), cfg.t0, cfg.t_final), table


def run_validate(cfg: ValidateConfig):
    out, rows, ok = {}, [["item", "criterion", "value", "passed"]], True
    if cfg.pset is not None or cfg.projectors is not None:
        if cfg.projectors is not None:
            report = validate([operator_from_json(p).matrix for p in cfg.projectors])
        else:
            report = validate(pset_from_json(cfg.pset))
        out["projectors"] = report.as_dict()
        ok = ok and report.passed
        for name in ("hermiticity", "idempotence", "orthogonality", "completeness"):
            rows.append(["projectors", name, getattr(report, name), report.passed])
    if cfg.state is not None:
        rho = operator_from_json(cfg.state, density=True)
        out["state"] = {"dim": rho.dim, "trace": float(rho.trace().real), "min_eigenvalue": float(np.linalg.eigvalsh(rho.matrix)[0]), "valid": True}
        rows.append(["state", "valid", 1.0, True])
    if not out:
        raise SchemaError("validate needs 'pset', 'projectors' or 'state'")
    return out, rows, ok


def run_reduce(cfg: ReduceConfig):
    rho = operator_from_json(cfg.state, density=True)
    pset = pset_from_json(cfg.pset, rho.layout)
    red = reduce(rho, pset)
    out = {"reduced": reduced_to_json(red), "pset": pset_to_json(pset)}
    rows = [["index", "label", "weight", "rank"]]
    for i, (w, l) in enumerate(zip(red.weights, pset.labels)):
        rows.append([i, "-".join(map(str, l)), float(w), pset.ranks[i]])
    if cfg.double_lueders:
        rr = double_lueders(rho, pset, cfg.seed)
        err = float(np.max(np.abs(rr.matrix - red.hat.matrix)))
        out["double_lueders"] = {"state": operator_to_json(rr), "max_error_vs_hat": err}
        return out, rows, err <= 1e-9
    return out, rows, True


def run_distance(cfg: DistanceConfig):
    rho = operator_from_json(cfg.rho, density=True)
    sigma = operator_from_json(cfg.sigma, density=True)
    ok = True
    if cfg.metric == "trace":
        rep = {"value": trace_distance(rho, sigma), "lower_bound": None, "upper_bound": None, "metric_name": "trace_distance"}
    elif cfg.metric == "fidelity":
        rep = {"value": fidelity(rho, sigma), "lower_bound": None, "upper_bound": None, "metric_name": "fidelity"}
    elif cfg.metric == "bounds":
        r = bound_check(rho, sigma, cfg.pure)
        rep, ok = r.as_dict(), r.contained
        rep["contained"] = r.contained
    elif cfg.metric == "pseudometric":
        if cfg.qset is None:
            raise SchemaError("pseudometric needs 'qset'")
        q = pset_from_json(cfg.qset, rho.layout) if isinstance(cfg.qset, dict) else [operator_from_json(p).matrix for p in cfg.qset]
        v = pseudometric(rho, sigma, q)
        rep = {"value": v, "lower_bound": None, "upper_bound": trace_distance(rho, sigma), "metric_name": "pseudometric"}
        ok = v <= rep["upper_bound"] + 1e-9
    else:
        if cfg.pset is None:
            raise SchemaError("class distance needs 'pset'")
        pset = pset_from_json(cfg.pset, rho.layout)
        v = class_distance(reduce(rho, pset), reduce(sigma, pset))
        rep = {"value": v, "lower_bound": None, "upper_bound": None, "metric_name": "class_distance", "class_equal": class_equal(rho, sigma, pset)}
    rows = [["metric_name", "value", "lower_bound", "upper_bound"], [rep["metric_name"], rep["value"], rep["lower_bound"], rep["upper_bound"]]]
    return rep, rows, ok


def run_sieve(cfg: SieveSpec):
    model = None
    if cfg.model is not None:
        model, H, layout, rho = _model_parts(cfg.model, cfg.state)
    else:
        if cfg.hamiltonian is None or cfg.state is None:
            raise SchemaError("sieve needs a 'model' or both 'hamiltonian' and 'state'")
        H = operator_from_json(cfg.hamiltonian)
        rho = operator_from_json(cfg.state, density=True)
        layout = rho.layout
    table = builtin_psets(model)

    def resolve(p):
        if isinstance(p, str):
            if p not in table:
                raise SchemaError(f"unknown projector set name {p!r}")
            return table[p]
        return pset_from_json(p, layout)

    grid = [tuple(g) for g in cfg.grid]
    if cfg.theta_grid is not None:
        tg = cfg.theta_grid
        grid += [(0.0, float(t), 0.0) for t in np.linspace(tg.start, tg.stop, tg.n)]
    config = SieveConfig(
        H,
        cfg.dt,
        candidates=tuple(resolve(p) for p in cfg.candidates),
        reference=resolve(cfg.reference) if cfg.reference is not None else None,
        grid=tuple(grid),
        budget=cfg.budget,
        x0=tuple(cfg.x0) if cfg.x0 is not None else None,
        threads=thread_count(),
    )
    res = sieve_search(rho, config)
    terms = sieve_terms(rho, res.best_pset, H, cfg.dt)
    out = {
        "best_index": res.best_index,
        "best_key": _key(res.landscape[res.best_index][0]),
        "best_G": res.best_G,
        "best_pset": pset_to_json(res.best_pset),
        "best_concentration": transition_concentration(terms),
        "landscape": [{"key": _key(k), "G": g} for k, g in res.landscape],
    }
    rows = [["key", "G"]] + [[_key_str(k), g] for k, g in res.landscape]
    return out, rows, res.best_G >= -1e-9


def _key(k):
    return list(k) if isinstance(k, tuple) else k


def _key_str(k):
    return " ".join("%.17g" % v for v in k) if isinstance(k, tuple) else str(k)


def run_history_cfg(cfg: HistoryConfig):
    if cfg.sample and cfg.seed is None:
        raise SchemaError("sampled histories need a seed")
    model, schedule, table = build_schedule(cfg)
    rec = run_history(schedule, sample=cfg.sample, seed=cfg.seed)
    out = {
        "events": [{"t": e.t, "pset_ref": e.name, "mode": e.mode} for e in schedule.events],
        "weights": [[float(x) for x in w] for w in rec.weights],
        "outcomes": rec.outcomes,
        "final_state": operator_to_json(rec.final_state),
        "final": reduced_to_json(rec.final) if rec.final is not None else None,
    }
    if len(schedule.events) >= 2 and not cfg.sample:
        out["noninterference_defect"] = noninterference_defect(schedule)
    rows = [["event", "t", "pset_ref", "index", "weight"]]
    for n, (e, w) in enumerate(zip(schedule.events, rec.weights)):
        rows.extend([n, e.t, e.name, i, float(x)] for i, x in enumerate(w))
    if cfg.timeseries is not None:
        ts = timeseries(model, schedule, table, cfg.timeseries)
        out["timeseries"] = ts
        rows = [list(ts["columns"])] + ts["rows"]
    return out, rows, True


def timeseries(model, schedule: HistorySchedule, table: dict, spec: TimeseriesSpec) -> dict:
    """``|r(t)|`` (dephasing models only) and the stability defect of every
    named projector set, starting from the initial state."""
    names = sorted(table)
    cols = ["t", "abs_r"] + [f"defect_{n}" for n in names]
    rows = []
    for t in np.linspace(0.0, spec.t_max, spec.n):
        r = abs(dephasing_factor(model, t)) if isinstance(model, DephasingModel) else None
        defects = [stability_defect(schedule.initial, table[n], schedule.hamiltonian, float(t)) for n in names]
        rows.append([float(t), r] + defects)
    return {"columns": cols, "rows": rows}


def run_ensemble(cfg: EnsembleConfig, threads: Optional[int] = None):
    if cfg.seed is None:
        raise SchemaError("ensemble needs a seed")
    _, schedule, _ = build_schedule(cfg)
    res = ensemble_frequencies(schedule, cfg.M, cfg.seed, thread_count(threads))
    rows = [["index", "count", "frequency", "weight", "radius", "flag"]]
    for i in range(len(res.weights)):
        rows.append([i, int(res.counts[i]), float(res.frequencies[i]), float(res.weights[i]), float(res.radii[i]), bool(res.flags[i])])
    return res.as_dict(), rows, not res.flags.any()


def random_total_pset(d: int, rng: np.random.Generator):
    n_blocks = int(rng.integers(2, d + 1))
    cuts = np.sort(rng.choice(np.arange(1, d), n_blocks - 1, replace=False))
    ranks = [int(r) for r in np.diff([0, *cuts, d])]
    return basis_partition(Layout([d]), random_unitary(d, rng), ranks)


def bounds_trial(d: int, seed: int, j: int) -> dict:
    """One pure state against its Lüders mixture and branches."""
    rng = np.random.default_rng([seed, j])
    rho = random_state([d], 1, rng)
    pset = random_total_pset(d, rng)
    w = weights(rho, pset)
    mix = lueders_mix(rho, pset)
    rep = bound_check(rho, mix, pure=True)
    violations = 0 if rep.contained else 1
    f_mix_err = abs(fidelity(rho, mix) - float(np.sum(w**2)))
    f_branch_err = 0.0
    for i in range(len(pset)):
        if w[i] > ZERO_WEIGHT:
            branch = lueders_branch(rho, pset, i)
            violations += 0 if bound_check(rho, branch, pure=True).contained else 1
            f_branch_err = max(f_branch_err, abs(fidelity(rho, branch) - w[i]))
    return {
        "trial": j,
        "dim": d,
        "n_projectors": len(pset),
        "D_mix": rep.value,
        "lower": rep.lower_bound,
        "upper": rep.upper_bound,
        "F_mix": 1.0 - rep.lower_bound,
        "fidelity_mix_error": f_mix_err,
        "fidelity_branch_error": f_branch_err,
        "violations": violations,
    }


def bounds_suite(trials: int, dims, seed: int, threads: Optional[int] = None) -> dict:
    dims = list(dims)
    jobs = [(dims[j % len(dims)], seed, j) for j in range(trials)]
    with ThreadPoolExecutor(max_workers=thread_count(threads)) as pool:
        rows = list(pool.map(lambda a: bounds_trial(*a), jobs))
    n_viol = sum(r["violations"] for r in rows)
    mix_err = max(r["fidelity_mix_error"] for r in rows)
    branch_err = max(r["fidelity_branch_error"] for r in rows)
    return {
        "trials": trials,
        "dims": dims,
        "seed": seed,
        "bound_violations": n_viol,
        "max_fidelity_mix_error": mix_err,
        "max_fidelity_branch_error": branch_err,
        "passed": n_viol == 0 and mix_err <= IDENTITY_TOL and branch_err <= IDENTITY_TOL,
        "rows": rows,
    }


def run_bounds(cfg: BoundsConfig, threads: Optional[int] = None):
    if cfg.seed is None:
        raise SchemaError("bounds-suite needs a seed")
    res = bounds_suite(cfg.trials, cfg.dims, cfg.seed, threads)
    cols = list(res["rows"][0].keys())
    rows = [cols] + [[r[c] for c in cols] for r in res["rows"]]
    return res, rows, res["passed"]


def run_accept(cfg: AcceptConfig):
    from .acceptance import run_all

    results = run_all(cfg.only)
    out = {"criteria": [r.as_dict() for r in results], "passed": all(r.passed for r in results)}
    rows = [["id", "name", "passed", "summary"]] + [[r.id, r.name, r.passed, r.summary] for r in results]
    return out, rows, out["passed"]


RUNNERS = {
    "validate": run_validate,
    "reduce": run_reduce,
    "distance": run_distance,
    "sieve": run_sieve,
    "history": run_history_cfg,
    "ensemble": run_ensemble,
    "bounds-suite": run_bounds,
    "accept": run_accept,
}


def run(kind: str, cfg: Strict, threads: Optional[int] = None):
    """Dispatch one experiment; returns ``(envelope, csv_rows, ok)``.

    ``threads`` overrides ``REDUXON_THREADS`` for the parallel runners; it
    never changes the result.
    """
    if kind in STOCHASTIC and cfg.seed is None:
        raise SchemaError(f"'{kind}' is stochastic and needs a seed")
    if kind in STOCHASTIC:
        payload, rows, ok = RUNNERS[kind](cfg, threads)
    else:
        payload, rows, ok = RUNNERS[kind](cfg)
    return envelope(kind, cfg, payload), rows, ok


__all__ = ["KINDS", "SCHEMAS", "STOCHASTIC", "run", "bounds_suite", "bounds_trial", "build_schedule", "thread_count"]

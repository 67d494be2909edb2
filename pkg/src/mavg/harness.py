"""Multi-seed experiment orchestration: sweeps, bound-vs-empirical checks,
and hitting-time races between momentum settings.

Every cell of a sweep is a (hyperparameter tuple, seed) pair and is a pure
function of the sweep specification, so cells can run in any order on any
number of workers and the aggregate is byte-identical across repeats.  Traces
written by sweeps zero the wallclock column for the same reason.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import core, theory
from .errors import DivergenceError, InfeasibilityError
from .objectives import ObjectiveSpec, get_objective, value

AXIS_NAMES = ("num_learners", "batch_size", "local_steps", "step_size", "momentum")

# documented seed-count defaults: bound-validation experiments average over 20
# seeds, hitting-time races over 10
DEFAULT_BOUND_SEEDS = tuple(range(1, 21))
DEFAULT_RACE_SEEDS = tuple(range(1, 11))

AGGREGATE_HEADER = (
    "P,B,K,eta,mu,N,seed_count,mean_final_f,mean_avg_grad_sq,"
    "bound_total,feasible,median_iters_to_threshold"
)


@dataclass(frozen=True)
class SweepSpec:
    """A grid of hyperparameter tuples crossed with a set of master seeds.

    ``objective`` is a registry name or a user-supplied :class:`ObjectiveSpec`.
    """

    objective: str | ObjectiveSpec
    base: core.HyperParams
    axes: Mapping[str, Sequence] = None
    seeds: Sequence[int] = (0,)
    loss_threshold: float | None = None
    output_dir: Path | None = None

    def __post_init__(self):
        axes = dict(self.axes or {})
        for name, values in axes.items():
            if name not in AXIS_NAMES:
                raise ValueError(f"unknown sweep axis {name!r}; valid: {AXIS_NAMES}")
            if len(values) == 0:
                raise ValueError(f"axis {name!r} has an empty value list")
        if len(self.seeds) == 0:
            raise ValueError("at least one seed is required")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.output_dir is not None:
            object.__setattr__(self, "output_dir", Path(self.output_dir))

    def cells(self) -> list[core.HyperParams]:
        """The swept tuples in canonical axis order; every tuple is validated."""
        value_lists = [self.axes.get(name, [getattr(self.base, name)]) for name in AXIS_NAMES]
        out = []
        for combo in product(*value_lists):
            out.append(replace(self.base, **dict(zip(AXIS_NAMES, combo))))
        return out


@dataclass(frozen=True)
class CellResult:
    """Seed-aggregated statistics for one hyperparameter tuple."""

    hyper: core.HyperParams
    seed_count: int
    mean_final_f: float
    median_final_f: float
    std_final_f: float
    mean_avg_grad_sq: float
    median_avg_grad_sq: float
    std_avg_grad_sq: float
    bound_total: float
    feasible: bool
    median_iters_to_threshold: float
    per_seed_final_f: tuple[float, ...]
    per_seed_avg_grad_sq: tuple[float, ...]
    per_seed_iters: tuple[float, ...]
    assumption_violated: bool
    error: str | None = None


@dataclass(frozen=True)
class EmpiricalBoundReport:
    empirical_mean: float
    bound_total: float
    satisfied: bool


@dataclass(frozen=True)
class RaceEntry:
    momentum: float
    per_seed_iters: tuple[float, ...]
    median_iters: float
    speedup_vs_zero: float


@dataclass(frozen=True)
class RaceResult:
    threshold: float
    entries: tuple[RaceEntry, ...]
    mean_f_series: dict[float, np.ndarray]


def _resolve_objective(sweep: SweepSpec) -> ObjectiveSpec:
    if isinstance(sweep.objective, ObjectiveSpec):
        return sweep.objective
    return get_objective(sweep.objective)


def bound_inputs_for(spec: ObjectiveSpec) -> theory.BoundInputs:
    """Bound constants certified for this objective, starting at its init point."""
    return theory.BoundInputs(
        lipschitz_L=spec.lipschitz_L,
        grad_bound_M=spec.grad_bound_M,
        sigma2=spec.noise_sigma2,
        delta_f=value(spec, spec.init_point) - spec.f_star,
    )


def _bound_for_cell(spec: ObjectiveSpec, hyper: core.HyperParams) -> tuple[float, bool]:
    try:
        bb = theory.convergence_bound(
            hyper.momentum, hyper.meta_iters, hyper.step_size,
            hyper.num_learners, hyper.batch_size, hyper.local_steps,
            bound_inputs_for(spec),
        )
        return bb.total, bb.feasible
    except InfeasibilityError:
        return math.nan, False


def _trace_filename(hyper: core.HyperParams, seed: int) -> str:
    return (
        f"trace_p{hyper.num_learners}_b{hyper.batch_size}_k{hyper.local_steps}"
        f"_eta{hyper.step_size!r}_mu{hyper.momentum!r}_seed{seed}.csv"
    )


def _run_cell_seed(
    spec: ObjectiveSpec, hyper: core.HyperParams, seed: int
) -> core.RunTrace | DivergenceError:
    try:
        return core.run(spec, replace(hyper, master_seed=seed), record_wallclock=False)
    except DivergenceError as exc:
        return exc


def run_sweep(sweep: SweepSpec, workers: int = 1) -> list[CellResult]:
    """Run every (tuple x seed) combination and aggregate per tuple.

    Divergence in a cell is recorded in that cell's ``error`` field and leaves
    every other cell untouched.  With an output directory set, writes the
    resolved manifest, one trace CSV per (tuple, seed), and ``aggregate.csv``.
    """
    spec = _resolve_objective(sweep)
    cells = sweep.cells()
    jobs = [(ci, seed) for ci in range(len(cells)) for seed in sweep.seeds]

    def job(args):
        ci, seed = args
        return _run_cell_seed(spec, cells[ci], seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, jobs))
    else:
        outcomes = [job(j) for j in jobs]
    by_job = dict(zip(jobs, outcomes))

    results = []
    for ci, hyper in enumerate(cells):
        traces, failures = [], []
        for seed in sweep.seeds:
            out = by_job[(ci, seed)]
            (failures if isinstance(out, DivergenceError) else traces).append(out)
        bound_total, feasible = _bound_for_cell(spec, hyper)
        if failures:
            results.append(CellResult(
                hyper=hyper, seed_count=len(sweep.seeds),
                mean_final_f=math.nan, median_final_f=math.nan, std_final_f=math.nan,
                mean_avg_grad_sq=math.nan, median_avg_grad_sq=math.nan,
                std_avg_grad_sq=math.nan, bound_total=bound_total, feasible=feasible,
                median_iters_to_threshold=math.nan,
                per_seed_final_f=(), per_seed_avg_grad_sq=(), per_seed_iters=(),
                assumption_violated=False, error=str(failures[0]),
            ))
            continue
        finals = np.array([t.final_f for t in traces])
        avgs = np.array([t.avg_grad_sq for t in traces])
        if sweep.loss_threshold is None:
            iters = ()
            median_iters = math.nan
        else:
            iters = tuple(t.iters_to_threshold(sweep.loss_threshold) for t in traces)
            median_iters = float(np.median(iters))
        results.append(CellResult(
            hyper=hyper, seed_count=len(sweep.seeds),
            mean_final_f=float(finals.mean()),
            median_final_f=float(np.median(finals)),
            std_final_f=float(finals.std()),
            mean_avg_grad_sq=float(avgs.mean()),
            median_avg_grad_sq=float(np.median(avgs)),
            std_avg_grad_sq=float(avgs.std()),
            bound_total=bound_total, feasible=feasible,
            median_iters_to_threshold=median_iters,
            per_seed_final_f=tuple(float(x) for x in finals),
            per_seed_avg_grad_sq=tuple(float(x) for x in avgs),
            per_seed_iters=iters,
            assumption_violated=any(t.assumption_violated for t in traces),
        ))

    if sweep.output_dir is not None:
        _write_sweep_output(sweep, cells, by_job, results)
    return results


def aggregate_csv_lines(results: Sequence[CellResult]) -> list[str]:
    lines = [AGGREGATE_HEADER]
    for r in results:
        h = r.hyper
        lines.append(
            f"{h.num_learners},{h.batch_size},{h.local_steps},{h.step_size!r},"
            f"{h.momentum!r},{h.meta_iters},{r.seed_count},{r.mean_final_f!r},"
            f"{r.mean_avg_grad_sq!r},{r.bound_total!r},{int(r.feasible)},"
            f"{r.median_iters_to_threshold!r}"
        )
    return lines


def manifest_lines(sweep: SweepSpec) -> list[str]:
    name = sweep.objective.name if isinstance(sweep.objective, ObjectiveSpec) else sweep.objective
    lines = [
        "# resolved sweep specification",
        f"objective = {name}",
        f"num_learners = {sweep.base.num_learners}",
        f"batch_size = {sweep.base.batch_size}",
        f"local_steps = {sweep.base.local_steps}",
        f"step_size = {sweep.base.step_size!r}",
        f"momentum = {sweep.base.momentum!r}",
        f"meta_iters = {sweep.base.meta_iters}",
        "seeds = " + " ".join(str(s) for s in sweep.seeds),
    ]
    for name in AXIS_NAMES:
        if name in sweep.axes:
            lines.append(f"axis_{name} = " + " ".join(repr(v) for v in sweep.axes[name]))
    if sweep.loss_threshold is not None:
        lines.append(f"loss_threshold = {sweep.loss_threshold!r}")
    return lines


def _write_sweep_output(sweep, cells, by_job, results) -> None:
    out = sweep.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest").write_text("\n".join(manifest_lines(sweep)) + "\n")
    for (ci, seed), trace in by_job.items():
        if isinstance(trace, DivergenceError):
            continue
        core.write_trace(trace, out / _trace_filename(cells[ci], seed))
    (out / "aggregate.csv").write_text("\n".join(aggregate_csv_lines(results)) + "\n")


def empirical_vs_bound(sweep: SweepSpec, hyper: core.HyperParams) -> EmpiricalBoundReport:
    """Seed-averaged mean squared gradient norm against the certified bound.

    Refuses to run when the tuple fails the step-size conditions; the raised
    error carries the feasibility report.
    """
    spec = _resolve_objective(sweep)
    inputs = bound_inputs_for(spec)
    delta = theory.delta_max(hyper.step_size, hyper.momentum, inputs.lipschitz_L)
    report = theory.stepsize_feasible(
        hyper.step_size, hyper.momentum, hyper.local_steps, inputs.lipschitz_L, delta
    )
    if not report.feasible:
        err = InfeasibilityError(
            f"tuple fails the step-size conditions: {report}"
        )
        err.report = report
        raise err
    bb = theory.convergence_bound(
        hyper.momentum, hyper.meta_iters, hyper.step_size,
        hyper.num_learners, hyper.batch_size, hyper.local_steps, inputs,
    )
    means = []
    for seed in sweep.seeds:
        trace = core.run(spec, replace(hyper, master_seed=seed), record_wallclock=False)
        means.append(trace.avg_grad_sq)
    empirical = float(np.mean(means))
    return EmpiricalBoundReport(
        empirical_mean=empirical, bound_total=bb.total,
        satisfied=empirical <= bb.total,
    )


def race(sweep: SweepSpec, mu_list: Sequence[float], workers: int = 1) -> RaceResult:
    """Median iterations-to-threshold for each momentum value, vs momentum 0.

    The baseline must be part of ``mu_list``.  A momentum value whose seeds
    never reach the threshold reports an infinite median (and zero speedup),
    not an error.
    """
    if sweep.loss_threshold is None:
        raise ValueError("race needs a loss_threshold on the sweep spec")
    if not any(mu == 0.0 for mu in mu_list):
        raise ValueError("mu_list must contain the 0.0 baseline")
    spec = _resolve_objective(sweep)
    threshold = sweep.loss_threshold

    jobs = [(mu, seed) for mu in mu_list for seed in sweep.seeds]

    def job(args):
        mu, seed = args
        hyper = replace(sweep.base, momentum=mu, master_seed=seed)
        return core.run(spec, hyper, record_wallclock=False)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = dict(zip(jobs, pool.map(job, jobs)))
    else:
        traces = {j: job(j) for j in jobs}

    medians = {}
    per_seed = {}
    series = {}
    for mu in mu_list:
        iters = tuple(traces[(mu, s)].iters_to_threshold(threshold) for s in sweep.seeds)
        per_seed[mu] = iters
        medians[mu] = float(np.median(iters))
        series[mu] = np.mean([traces[(mu, s)].f_values for s in sweep.seeds], axis=0)

    base_median = medians[0.0]
    entries = []
    for mu in mu_list:
        m = medians[mu]
        if math.isinf(m):
            speedup = math.nan if math.isinf(base_median) else 0.0
        elif math.isinf(base_median):
            speedup = math.inf
        else:
            speedup = base_median / m
        entries.append(RaceEntry(
            momentum=mu, per_seed_iters=per_seed[mu],
            median_iters=m, speedup_vs_zero=speedup,
        ))
    result = RaceResult(threshold=threshold, entries=tuple(entries), mean_f_series=series)
    if sweep.output_dir is not None:
        _write_race_output(sweep, result)
    return result


def _write_race_output(sweep: SweepSpec, result: RaceResult) -> None:
    out = sweep.output_dir
    out.mkdir(parents=True, exist_ok=True)
    lines = ["mu,seed,iters_to_threshold"]
    for entry in result.entries:
        for seed, iters in zip(sweep.seeds, entry.per_seed_iters):
            lines.append(f"{entry.momentum!r},{seed},{iters!r}")
    (out / "race.csv").write_text("\n".join(lines) + "\n")
    series_lines = ["mu,n,f_value"]
    for entry in result.entries:
        f_series = result.mean_f_series[entry.momentum]
        for i, f in enumerate(f_series):
            series_lines.append(f"{entry.momentum!r},{i + 1},{float(f)!r}")
    (out / "series.csv").write_text("\n".join(series_lines) + "\n")

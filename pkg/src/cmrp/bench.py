"""Evaluation protocol: normalized mission time, cumulative curves, sweeps and timing."""
from __future__ import annotations

import csv
import platform
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import torch

from .core import Scenario, count_solutions, mission_times
from .generate import GeneratorConfig, generate_batch
from .heuristic.local_search import SearchConfig, solve as local_search
from .nn.decode import make_batch, rollout_batch, solve_batch
from .nn.model import AttentionModel
from .oracle import enumerate_population, sample_median

SCHEMA_VERSION = 1
DEGENERATE_EPS = 1e-12

OPT_P, MED_P, MED_S, NOPT = "opt_p", "med_p", "med_s", "nopt"


class DegenerateBenchmark(ValueError):
    pass


def normalized_mission_time(mt_model: float, mt_benchmark: float, mt_medp: float) -> float:
    """0 when the model matches the benchmark, 1 when it matches the random-plan median."""
    denom = mt_medp - mt_benchmark
    if abs(denom) < DEGENERATE_EPS:
        raise DegenerateBenchmark(f"median {mt_medp} equals benchmark {mt_benchmark}")
    return (mt_model - mt_benchmark) / denom


def cumulative_curve(values: Sequence[float], thresholds: Sequence[float]) -> list[tuple[float, float]]:
    """Fraction of values strictly below each threshold."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("no values")
    return [(float(t), float(np.searchsorted(v, t, side="left") / v.size)) for t in thresholds]


def threshold_proportions(values: Sequence[float], levels: Sequence[float] = (0.01, 0.1)) -> dict[float, float]:
    return dict(cumulative_curve(values, levels))


def normalized_runtime(rt_model: float, rt_benchmark: float) -> float:
    """Model runtime as a percentage of the benchmark's."""
    if rt_benchmark <= 0:
        raise ValueError("benchmark runtime must be positive")
    return rt_model / rt_benchmark * 100.0


def hardware_descriptor() -> str:
    return f"{platform.machine()} {platform.processor() or 'cpu'} {platform.python_implementation()} " \
           f"{platform.python_version()} torch-{torch.__version__} threads={torch.get_num_threads()}"


def time_call(fn: Callable[[], object], repeats: int = 5) -> float:
    """Median wall time over ``repeats`` calls after one untimed warm-up call."""
    fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def neural_solver(model: AttentionModel) -> Callable[[Scenario], object]:
    def run(s: Scenario):
        batch = make_batch([s], model.norm, dtype=next(model.parameters()).dtype)
        with torch.no_grad():
            return rollout_batch(model, batch, "greedy")

    return run


@dataclass
class EvalRecord:
    instance_id: str
    n: int
    m: int
    delta: int
    seed: int
    index: int
    times: dict[str, float] = field(default_factory=dict)
    walls: dict[str, float] = field(default_factory=dict)

    @property
    def subtasks_per_agent(self) -> float:
        return self.n * self.delta / self.m


@dataclass(frozen=True)
class SweepConfig:
    cells: tuple[tuple[int, int, int], ...] = tuple(
        (n, m, d) for m in (2, 4, 6) for n in (2, 4, 6) for d in (1, 2, 4)
    )
    instances_per_seed: int = 10_000
    seeds: tuple[int, ...] = (0, 1, 2)
    solvers: tuple[str, ...] = (NOPT, MED_S, OPT_P, MED_P)
    enumeration_cap: int = 2_000_000
    med_samples: int = 101
    search: SearchConfig = SearchConfig()
    timing_instances: int = 0  # per cell; 0 disables wall-time measurement
    test_seed_offset: int = 10_000  # keeps test instances apart from training seeds

    def __post_init__(self):
        if not self.cells:
            raise ValueError("empty sweep grid")


@dataclass
class CellSummary:
    cell: tuple[int, int, int]
    count: int
    means: dict[str, float]
    gap_pct: dict[str, float]  # mean per-instance % increase over NOpt per model
    wall_median: dict[str, float]


@dataclass
class SweepResult:
    records: list[EvalRecord]
    cells: list[CellSummary]
    skipped: list[tuple[tuple[int, int, int], str, str]]
    hardware: str = field(default_factory=hardware_descriptor)

    @property
    def complete(self) -> bool:
        return not self.skipped


def _cell_instances(cfg: SweepConfig, cell, seed: int) -> list[Scenario]:
    n, m, d = cell
    gen = GeneratorConfig(n_tasks=n, n_agents=m, delta=d)
    return generate_batch(gen, cfg.instances_per_seed, seed=cfg.test_seed_offset + seed)


ModelSpec = AttentionModel | Mapping[tuple[int, int, int], AttentionModel]


def _model_for(spec: ModelSpec, cell):
    if isinstance(spec, AttentionModel):
        return spec
    return spec.get(tuple(cell))


def run_sweep(
    config: SweepConfig,
    models: Mapping[str, ModelSpec] | None = None,
    progress: Callable[[str], None] | None = None,
) -> SweepResult:
    """Evaluate every solver on every cell; deterministic given the seeds (wall times aside)."""
    models = dict(models or {})
    records: list[EvalRecord] = []
    summaries: list[CellSummary] = []
    skipped = []
    for cell in config.cells:
        n, m, d = cell
        cell_records: list[EvalRecord] = []
        for seed in config.seeds:
            scen = _cell_instances(config, cell, seed)
            recs = [EvalRecord(f"{n}-{m}-{d}-{seed}-{i}", n, m, d, seed, i) for i in range(len(scen))]
            enumerable = count_solutions(n * d, m) <= config.enumeration_cap
            for rec, s in zip(recs, scen):
                if (OPT_P in config.solvers or MED_P in config.solvers) and enumerable:
                    pop = enumerate_population(s, cap=config.enumeration_cap)
                    if OPT_P in config.solvers:
                        rec.times[OPT_P] = pop.optimal_time
                    if MED_P in config.solvers:
                        rec.times[MED_P] = pop.median_time
                if MED_S in config.solvers:
                    rng = np.random.default_rng([config.test_seed_offset + seed, rec.index])
                    rec.times[MED_S] = sample_median(s, config.med_samples, rng)
                if NOPT in config.solvers:
                    rec.times[NOPT] = mission_times(s, local_search(s, config.search)).max_time
            for name, spec in models.items():
                model = _model_for(spec, cell)
                if model is None:
                    entry = (tuple(cell), name, "no model for this cell")
                    if entry not in skipped:
                        skipped.append(entry)
                    continue
                _, times = solve_batch(model, scen)
                for rec, t in zip(recs, times):
                    rec.times[name] = float(t)
            if config.timing_instances:
                for rec, s in list(zip(recs, scen))[: config.timing_instances]:
                    if NOPT in config.solvers:
                        rec.walls[NOPT] = time_call(lambda: local_search(s, config.search), repeats=5)
                    for name, spec in models.items():
                        model = _model_for(spec, cell)
                        if model is not None:
                            rec.walls[name] = time_call(lambda: neural_solver(model)(s), repeats=5)
            cell_records.extend(recs)
        records.extend(cell_records)
        summaries.append(_summarize(cell, cell_records, list(models)))
        if progress:
            progress(f"cell {cell}: " + ", ".join(f"{k}={v:.3f}" for k, v in summaries[-1].means.items()))
    return SweepResult(records, summaries, skipped)


def _summarize(cell, recs: list[EvalRecord], model_names: list[str]) -> CellSummary:
    names = sorted({k for r in recs for k in r.times})
    means = {k: float(np.mean([r.times[k] for r in recs if k in r.times])) for k in names}
    gaps = {}
    for name in model_names:
        vals = [100.0 * (r.times[name] / r.times[NOPT] - 1.0) for r in recs if name in r.times and NOPT in r.times]
        if vals:
            gaps[name] = float(np.mean(vals))
    walls = {}
    for k in sorted({k for r in recs for k in r.walls}):
        walls[k] = float(np.median([r.walls[k] for r in recs if k in r.walls]))
    return CellSummary(tuple(cell), len(recs), means, gaps, walls)


def write_records_csv(result: SweepResult, path, include_timing: bool = True) -> None:
    solvers = sorted({k for r in result.records for k in r.times})
    timed = sorted({k for r in result.records for k in r.walls}) if include_timing else []
    cols = ["schema", "instance_id", "n", "m", "delta", "seed", "index", "subtasks_per_agent"]
    cols += [f"mt_{s}" for s in solvers] + [f"rt_{s}" for s in timed]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for r in result.records:
            row = [SCHEMA_VERSION, r.instance_id, r.n, r.m, r.delta, r.seed, r.index, repr(r.subtasks_per_agent)]
            row += [repr(r.times[s]) if s in r.times else "" for s in solvers]
            row += [repr(r.walls[s]) if s in r.walls else "" for s in timed]
            w.writerow(row)


def write_summary_csv(result: SweepResult, path, include_timing: bool = True) -> None:
    solvers = sorted({k for c in result.cells for k in c.means})
    models = sorted({k for c in result.cells for k in c.gap_pct})
    timed = sorted({k for c in result.cells for k in c.wall_median}) if include_timing else []
    cols = ["schema", "n", "m", "delta", "count"] + [f"mean_{s}" for s in solvers]
    cols += [f"gap_pct_{k}" for k in models] + [f"rt_median_{k}" for k in timed]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for c in result.cells:
            row = [SCHEMA_VERSION, *c.cell, c.count]
            row += [repr(c.means[s]) if s in c.means else "" for s in solvers]
            row += [repr(c.gap_pct[k]) if k in c.gap_pct else "" for k in models]
            row += [repr(c.wall_median[k]) if k in c.wall_median else "" for k in timed]
            w.writerow(row)


def normalized_values(records: Sequence[EvalRecord], model: str, benchmark: str = OPT_P,
                      median: str = MED_P) -> tuple[list[float], int]:
    """Normalized mission times of ``model`` over records; returns (values, degenerate count)."""
    out, flagged = [], 0
    for r in records:
        if model not in r.times or benchmark not in r.times or median not in r.times:
            continue
        try:
            out.append(normalized_mission_time(r.times[model], r.times[benchmark], r.times[median]))
        except DegenerateBenchmark:
            flagged += 1
    return out, flagged

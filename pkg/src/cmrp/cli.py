"""Command line entry point: generate, enumerate, solve, train, bench, plot."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from .core import Plan, mission_times, read_scenarios, write_scenarios
from .generate import PRESETS, GeneratorConfig, generate_batch

log = logging.getLogger("cmrp")


def _range(text: str):
    """"4" -> 4, "1-6" -> (1, 6)."""
    if "-" in text:
        lo, hi = text.split("-", 1)
        return int(lo), int(hi)
    return int(text)


def cmd_generate(args) -> int:
    base = PRESETS[args.preset] if args.preset else GeneratorConfig()
    cfg = replace(base, seed=args.seed)
    if args.n is not None:
        cfg = replace(cfg, n_tasks=_range(args.n))
    if args.m is not None:
        cfg = replace(cfg, n_agents=_range(args.m))
    if args.delta is not None:
        cfg = replace(cfg, delta=_range(args.delta))
    write_scenarios(args.out, generate_batch(cfg, args.count, args.seed))
    return 0


def cmd_enumerate(args) -> int:
    from .oracle import PopulationTooLarge, enumerate_population

    scenarios = read_scenarios(args.inp)
    status = 0
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "n_subtasks", "m", "population", "opt_p", "med_p", "optimal_plan", "status"])
        for i, s in enumerate(scenarios):
            try:
                st = enumerate_population(s, cap=args.cap)
                w.writerow([i, s.n_subtasks, s.n_agents, st.plans_visited, repr(st.optimal_time),
                            repr(st.median_time), json.dumps(st.optimal_plan.to_dict()["routes"]), "ok"])
            except PopulationTooLarge as err:
                w.writerow([i, s.n_subtasks, s.n_agents, err.count, "", "", "", "refused"])
                status = 1
    return status


def cmd_solve(args) -> int:
    scenarios = read_scenarios(args.inp)
    if args.method == "heuristic":
        from .heuristic.local_search import SearchConfig, solve

        cfg = SearchConfig(seed=args.seed)
        plans = [solve(s, cfg) for s in scenarios]
    elif args.method == "external":
        from .heuristic.lkh import ExternalSolverUnavailable, lkh3_solve

        try:
            plans = [lkh3_solve(s, args.binary) for s in scenarios]
        except ExternalSolverUnavailable as err:
            print(err, file=sys.stderr)
            return 2
    else:
        from .nn.decode import solve_batch
        from .nn.io import load_model

        if not args.model:
            print("--model is required for the neural method", file=sys.stderr)
            return 2
        plans, _ = solve_batch(load_model(args.model), scenarios)
    with open(args.out, "w") as f:
        for s, p in zip(scenarios, plans):
            mt = mission_times(s, p)
            f.write(json.dumps({**p.to_dict(), "per_agent": list(mt.per_agent), "max_time": mt.max_time}) + "\n")
    return 0


def cmd_train(args) -> int:
    from .nn.io import save_model
    from .training import DESK_SCALE, load_config, train

    torch.set_num_threads(1 if args.deterministic else torch.get_num_threads())
    cfg = load_config(args.config) if args.config else DESK_SCALE
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    model, report = train(cfg, progress=True)
    save_model(model, args.out, extra={"train_config": json.loads(json.dumps(cfg.to_dict())),
                                       "best_epoch": report.best_epoch,
                                       "best_val_cost": report.best_val_cost})
    if args.report:
        report.to_csv(args.report)
    return 1 if report.diverged else 0


def _parse_cells(text: str):
    cells = []
    for part in text.split(","):
        n, m, d = (int(x) for x in part.split("x"))
        cells.append((n, m, d))
    return tuple(cells)


def cmd_bench(args) -> int:
    from . import bench, plot
    from .heuristic.local_search import SearchConfig
    from .nn.io import load_model

    models = {}
    for spec in args.model or []:
        name, path = spec.split("=", 1)
        try:
            models[name] = load_model(path)
        except FileNotFoundError:
            log.error("model file %s missing; cells for %s are skipped", path, name)
            models[name] = {}
    cfg = bench.SweepConfig(
        cells=_parse_cells(args.cells),
        instances_per_seed=args.instances,
        seeds=tuple(args.seeds),
        timing_instances=args.timing,
        search=SearchConfig(seed=args.seed),
    )
    result = bench.run_sweep(cfg, models, progress=log.info)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        bench.write_records_csv(result, out / "records.csv", include_timing=not args.no_timing)
        bench.write_summary_csv(result, out / "summary.csv", include_timing=not args.no_timing)
    else:
        (out / "summary.json").write_text(json.dumps(
            {"hardware": result.hardware,
             "cells": [c.__dict__ for c in result.cells],
             "skipped": result.skipped}, indent=1, default=list))
    series = {}
    for c in result.cells:
        for k, v in c.means.items():
            series.setdefault(k, []).append((len(series.get(k, [])), v))
    if series:
        plot.plot_curves(series, out / "means.svg", "cell index", "mean mission time (s)")
    for name in models:
        vals, _ = bench.normalized_values(result.records, name)
        if vals:
            xs = np.linspace(-0.2, 1.0, 61)
            plot.plot_curves({name: bench.cumulative_curve(vals, xs)}, out / f"cumulative_{name}.svg",
                             "normalized mission time", "fraction of solutions", step=True)
    for cell, name, reason in result.skipped:
        log.warning("skipped %s for %s: %s", cell, name, reason)
    return 0 if result.complete else 1


def cmd_plot(args) -> int:
    from . import plot
    from .heuristic.local_search import solve
    from .oracle import PopulationTooLarge, enumerate_population

    scenarios = read_scenarios(args.inp)
    s = scenarios[args.index]
    plans = {"NOpt": solve(s)}
    try:
        plans["Opt-P"] = enumerate_population(s, cap=args.cap).optimal_plan
    except PopulationTooLarge:
        pass
    if args.model:
        from .nn.decode import rollout
        from .nn.io import load_model

        plans["GATR"] = rollout(s, load_model(args.model))[0]
    if args.plans:
        lines = Path(args.plans).read_text().splitlines()
        plans["input"] = Plan.from_dict(json.loads(lines[args.index]))
    plot.plot_tours(s, plans, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cmrp", description="Cooperative mission replanning toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="random scenarios as JSON lines")
    g.add_argument("--n", help="tasks, e.g. 4 or 1-6")
    g.add_argument("--m", help="agents")
    g.add_argument("--delta", help="discretization level")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("enumerate", help="brute-force Opt-P / Med-P")
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--cap", type=int, default=100_000_000)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("solve", help="solve scenarios with one method")
    s.add_argument("--method", choices=["heuristic", "external", "neural"], default="heuristic")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--model")
    s.add_argument("--binary", help="external solver binary (default: $CMRP_LKH3)")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("train", help="REINFORCE training")
    t.add_argument("--config", help="TrainConfig JSON (default: desk scale)")
    t.add_argument("--out", required=True)
    t.add_argument("--report")
    t.add_argument("--seed", type=int)
    t.add_argument("--deterministic", action="store_true", help="single-threaded reproducible mode")
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("bench", help="evaluation sweep")
    b.add_argument("--cells", default="4x3x2", help="comma separated NxMxDELTA cells")
    b.add_argument("--model", action="append", help="name=path.npz (repeatable)")
    b.add_argument("--instances", type=int, default=100)
    b.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--timing", type=int, default=0, help="instances per cell to time")
    b.add_argument("--no-timing", action="store_true", help="omit timing columns")
    b.add_argument("--format", choices=["csv", "json"], default="csv")
    b.add_argument("--out", required=True, help="output directory")
    b.set_defaults(func=cmd_bench)

    pl = sub.add_parser("plot", help="SVG of tours for one scenario")
    pl.add_argument("--in", dest="inp", required=True)
    pl.add_argument("--index", type=int, default=0)
    pl.add_argument("--model")
    pl.add_argument("--plans", help="JSON-lines plans file to overlay")
    pl.add_argument("--cap", type=int, default=2_000_000)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

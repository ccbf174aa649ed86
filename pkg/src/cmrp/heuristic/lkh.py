"""Adapter for an external LKH-3 binary (min-max multi-salesman ATSP).

The scenario's cost matrix is written as an explicit full matrix. With zero-cost
depot-to-start edges and forbidden edges into starts, every salesman tour has the
form depot -> start_k -> sub-tasks -> depot, which is exactly an agent route.
"""
from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import Plan, Scenario, build_cost_matrix, validate_plan, InfeasiblePlanError

ENV_VAR = "CMRP_LKH3"


class ExternalSolverUnavailable(RuntimeError):
    pass


class TourParseError(ValueError):
    pass


@dataclass(frozen=True)
class LKHParams:
    scale: int = 10_000  # seconds -> integer units
    runs: int = 1
    max_trials: int = 10_000
    seed: int = 1
    time_limit: float | None = None
    extra: tuple[tuple[str, str], ...] = ()


def integer_matrix(scenario: Scenario, scale: int) -> np.ndarray:
    e = build_cost_matrix(scenario).entries
    finite = np.isfinite(e)
    w = np.zeros(e.shape, dtype=np.int64)
    w[finite] = np.rint(e[finite] * scale).astype(np.int64)
    forbidden = int(w[finite].max(initial=0)) * e.shape[0] + 1
    w[~finite] = forbidden
    return w


def lkh3_export(scenario: Scenario, path, params: LKHParams = LKHParams(), tour_path=None) -> tuple[Path, Path]:
    """Write ``<path>.atsp`` and ``<path>.par``; returns both paths."""
    base = Path(path)
    problem = base.with_suffix(".atsp")
    par = base.with_suffix(".par")
    tour_path = Path(tour_path) if tour_path else base.with_suffix(".tour")
    w = integer_matrix(scenario, params.scale)
    dim = w.shape[0]
    lines = [
        f"NAME : {base.name}",
        "TYPE : ATSP",
        f"DIMENSION : {dim}",
        "EDGE_WEIGHT_TYPE : EXPLICIT",
        "EDGE_WEIGHT_FORMAT : FULL_MATRIX",
        "EDGE_WEIGHT_SECTION",
    ]
    lines += [" ".join(str(int(x)) for x in row) for row in w]
    lines += ["DEPOT_SECTION", "1", "-1", "EOF"]
    problem.write_text("\n".join(lines) + "\n")
    pars = [
        f"PROBLEM_FILE = {problem}",
        f"SALESMEN = {scenario.n_agents}",
        "MTSP_OBJECTIVE = MINMAX",
        f"RUNS = {params.runs}",
        f"MAX_TRIALS = {params.max_trials}",
        f"SEED = {params.seed}",
        f"TOUR_FILE = {tour_path}",
    ]
    if params.time_limit is not None:
        pars.append(f"TIME_LIMIT = {params.time_limit}")
    pars += [f"{k} = {v}" for k, v in params.extra]
    par.write_text("\n".join(pars) + "\n")
    return problem, par


def write_tour(plan: Plan, path, n_agents: int, n_subtasks: int) -> None:
    """Emit a tour file in the solver's format; depot copies are numbered above DIMENSION."""
    dim = n_agents + 1 + n_subtasks
    seq = []
    for k, route in enumerate(plan.routes):
        seq.append(1 if k == 0 else dim + k)
        seq.append(k + 2)
        seq.extend(n_agents + 2 + s for s in route)
    lines = ["NAME : cmrp", "TYPE : TOUR", f"DIMENSION : {dim}", "TOUR_SECTION"]
    lines += [str(v) for v in seq] + ["-1", "EOF"]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_tour(text: str, n_agents: int, n_subtasks: int) -> Plan:
    dim = n_agents + 1 + n_subtasks
    nodes: list[int] = []
    in_section = False
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not in_section:
            if s.startswith("TOUR_SECTION"):
                in_section = True
            continue
        if not s:
            continue
        if s == "EOF":
            break
        for tok in s.split():
            try:
                v = int(tok)
            except ValueError:
                raise TourParseError(f"line {lineno}: not an integer: {line!r}") from None
            if v == -1:
                in_section = False
                break
            if v < 1:
                raise TourParseError(f"line {lineno}: bad node id: {line!r}")
            nodes.append(v)
        if not in_section:
            break
    if not nodes:
        raise TourParseError("no TOUR_SECTION found")
    # rotate so the sequence starts at the depot
    if 1 not in nodes:
        raise TourParseError("tour does not contain the depot")
    i = nodes.index(1)
    nodes = nodes[i:] + nodes[:i]
    routes: list[list[int] | None] = [None] * n_agents
    current: list[int] | None = None
    for v in nodes:
        if v == 1 or v > dim:
            current = None
            continue
        if 2 <= v <= n_agents + 1:
            if current is not None:
                raise TourParseError(f"start vertex {v} entered from a non-depot vertex")
            k = v - 2
            if routes[k] is not None:
                raise TourParseError(f"start vertex {v} visited twice")
            current = routes[k] = []
            continue
        if current is None:
            raise TourParseError(f"sub-task vertex {v} reached directly from the depot")
        current.append(v - n_agents - 2)
    plan = Plan(tuple(tuple(r) if r is not None else () for r in routes))
    return plan


def find_binary(binary_path=None) -> str:
    candidate = binary_path or os.environ.get(ENV_VAR)
    if candidate and (Path(candidate).is_file() or shutil.which(candidate)):
        return str(candidate)
    if candidate:
        raise ExternalSolverUnavailable(f"external solver unavailable: {candidate} not found")
    raise ExternalSolverUnavailable(f"external solver unavailable: set ${ENV_VAR} or pass a binary path")


def lkh3_solve(scenario: Scenario, binary_path=None, params: LKHParams = LKHParams()) -> Plan:
    binary = find_binary(binary_path)
    with tempfile.TemporaryDirectory(prefix="cmrp-lkh-") as tmp:
        base = Path(tmp) / "instance"
        _, par = lkh3_export(scenario, base, params)
        proc = subprocess.run([binary, str(par)], capture_output=True, text=True, stdin=subprocess.DEVNULL)
        if proc.returncode != 0:
            raise RuntimeError(f"external solver failed ({proc.returncode}): {proc.stderr.strip()[-500:]}")
        tour = base.with_suffix(".tour")
        if not tour.exists():
            raise TourParseError(f"solver produced no tour file; stdout tail: {proc.stdout[-500:]}")
        plan = parse_tour(tour.read_text(), scenario.n_agents, scenario.n_subtasks)
    report = validate_plan(scenario, plan)
    if not report:
        raise InfeasiblePlanError(report)
    return plan

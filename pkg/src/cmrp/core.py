"""Problem data model: scenarios, plans, the asymmetric cost matrix and plan evaluation.

Vertex layout used throughout the package::

    0            depot
    1 .. m       agent start locations (start of agent k is vertex k + 1)
    m+1 .. m+n'  sub-tasks, task i contributing sub-tasks i*delta .. i*delta + delta - 1

Plans address sub-tasks by their 0-based sub-task index, never by vertex index.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinate ({self.x}, {self.y})")

    def distance(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Task:
    location: Point2D
    time_cost: float

    def __post_init__(self):
        if not self.time_cost >= 0:
            raise ValueError(f"time cost must be non-negative, got {self.time_cost}")


@dataclass(frozen=True)
class SubTask:
    parent_task: int
    location: Point2D
    time_cost: float


@dataclass(frozen=True)
class Scenario:
    depot: Point2D
    starts: tuple[Point2D, ...]
    tasks: tuple[Task, ...]
    discretization: int = 1
    speed: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "starts", tuple(self.starts))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if len(self.starts) < 1:
            raise ValueError("a scenario needs at least one agent")
        if int(self.discretization) != self.discretization or self.discretization < 1:
            raise ValueError(f"discretization must be an integer >= 1, got {self.discretization}")
        if not self.speed > 0:
            raise ValueError(f"speed must be positive, got {self.speed}")

    @property
    def n_agents(self) -> int:
        return len(self.starts)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_subtasks(self) -> int:
        return len(self.tasks) * self.discretization

    @property
    def n_vertices(self) -> int:
        return self.n_subtasks + self.n_agents + 1

    def subtasks(self) -> list[SubTask]:
        return discretize(self.tasks, self.discretization)

    def vertex_points(self) -> list[Point2D]:
        """Locations of all vertices in matrix order."""
        return [self.depot, *self.starts, *(s.location for s in self.subtasks())]

    def vertex_time_costs(self) -> list[float]:
        return [0.0] * (self.n_agents + 1) + [s.time_cost for s in self.subtasks()]

    def to_dict(self) -> dict:
        return {
            "depot": _point_dict(self.depot),
            "starts": [_point_dict(p) for p in self.starts],
            "tasks": [{"location": _point_dict(t.location), "time_cost": t.time_cost} for t in self.tasks],
            "discretization": self.discretization,
            "speed": self.speed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            depot=_point(d["depot"]),
            starts=tuple(_point(p) for p in d["starts"]),
            tasks=tuple(Task(_point(t["location"]), float(t["time_cost"])) for t in d["tasks"]),
            discretization=int(d.get("discretization", 1)),
            speed=float(d.get("speed", 1.0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, s: str) -> "Scenario":
        return cls.from_dict(json.loads(s))


def _point_dict(p: Point2D) -> dict:
    return {"x": p.x, "y": p.y}


def _point(d) -> Point2D:
    if isinstance(d, dict):
        return Point2D(float(d["x"]), float(d["y"]))
    return Point2D(float(d[0]), float(d[1]))


@dataclass(frozen=True)
class Plan:
    """One ordered sub-task sequence per agent.

    Each route implicitly starts at the agent's start vertex and ends at the depot.
    """

    routes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(tuple(int(i) for i in r) for r in self.routes))

    def to_dict(self) -> dict:
        return {"routes": [list(r) for r in self.routes]}

    @classmethod
    def from_dict(cls, d: dict) -> "Plan":
        return cls(tuple(tuple(r) for r in d["routes"]))

    def to_giant_tour(self) -> list[int]:
        """Decoder view: -1 marks a return to the depot after each agent's route."""
        tour: list[int] = []
        for r in self.routes:
            tour.extend(r)
            tour.append(-1)
        return tour

    @classmethod
    def from_giant_tour(cls, tour: Iterable[int], n_agents: int) -> "Plan":
        routes: list[list[int]] = [[]]
        for v in tour:
            if v < 0:
                routes.append([])
            else:
                routes[-1].append(v)
        if routes and not routes[-1]:
            routes.pop()
        while len(routes) < n_agents:
            routes.append([])
        return cls(tuple(tuple(r) for r in routes))


@dataclass(frozen=True)
class MissionTimes:
    per_agent: tuple[float, ...]

    @property
    def max_time(self) -> float:
        return max(self.per_agent)


class VertexRole(enum.Enum):
    DEPOT = "depot"
    START = "start"
    SUBTASK = "subtask"
    PAD = "pad"


@dataclass(frozen=True)
class CostMatrix:
    """Asymmetric travel-plus-service matrix. ``entries[i, j]`` is the time to go
    from vertex i to vertex j and then perform j's time cost."""

    entries: np.ndarray
    roles: tuple[VertexRole, ...]
    role_index: tuple[int, ...]  # agent index for starts, sub-task index for sub-tasks, else -1

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def discretize(tasks: Sequence[Task], delta: int) -> list[SubTask]:
    if delta < 1:
        raise ValueError(f"discretization level must be >= 1, got {delta}")
    out = []
    for i, task in enumerate(tasks):
        t = task.time_cost / delta
        out.extend(SubTask(i, task.location, t) for _ in range(delta))
    return out


def build_cost_matrix(scenario: Scenario) -> CostMatrix:
    pts = scenario.vertex_points()
    xy = np.array([[p.x, p.y] for p in pts], dtype=np.float64)
    t = np.asarray(scenario.vertex_time_costs(), dtype=np.float64)
    m = scenario.n_agents
    diff = xy[:, None, :] - xy[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1]) / scenario.speed
    d[0, :] = 0.0  # leaving the depot is free
    entries = d + t[None, :]
    np.fill_diagonal(entries, 0.0)
    entries[1:, 1 : m + 1] = np.inf  # starts are reachable only from the depot
    entries.setflags(write=False)
    roles = (VertexRole.DEPOT,) + (VertexRole.START,) * m + (VertexRole.SUBTASK,) * scenario.n_subtasks
    role_index = (-1,) + tuple(range(m)) + tuple(range(scenario.n_subtasks))
    return CostMatrix(entries, roles, role_index)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    rule: str | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


class InfeasiblePlanError(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__(f"infeasible plan: {report.rule}: {report.detail}")
        self.report = report


def validate_plan(scenario: Scenario, plan: Plan) -> ValidationReport:
    n_sub = scenario.n_subtasks
    if len(plan.routes) != scenario.n_agents:
        return ValidationReport(
            False, "wrong_route_count", f"expected {scenario.n_agents} routes, got {len(plan.routes)}"
        )
    seen: set[int] = set()
    for k, route in enumerate(plan.routes):
        for s in route:
            if not 0 <= s < n_sub:
                return ValidationReport(False, "out_of_range", f"sub-task {s} in route {k} (n'={n_sub})")
            if s in seen:
                return ValidationReport(False, "duplicate", f"sub-task {s} visited twice (route {k})")
            seen.add(s)
    if len(seen) != n_sub:
        missing = min(set(range(n_sub)) - seen)
        return ValidationReport(False, "missing", f"sub-task {missing} is unassigned")
    return ValidationReport(True)


def mission_times(scenario: Scenario, plan: Plan) -> MissionTimes:
    report = validate_plan(scenario, plan)
    if not report:
        raise InfeasiblePlanError(report)
    subs = scenario.subtasks()
    out = []
    for start, route in zip(scenario.starts, plan.routes):
        pos, total = start, 0.0
        for s in route:
            sub = subs[s]
            total += pos.distance(sub.location) / scenario.speed + sub.time_cost
            pos = sub.location
        total += pos.distance(scenario.depot) / scenario.speed
        out.append(total)
    return MissionTimes(tuple(out))


def mission_times_from_matrix(cost: CostMatrix, plan: Plan) -> MissionTimes:
    """Same as :func:`mission_times` but via matrix lookups (no validation)."""
    e = cost.entries
    m = len(plan.routes)
    out = []
    for k, route in enumerate(plan.routes):
        v, total = k + 1, 0.0
        for s in route:
            w = m + 1 + s
            total += e[v, w]
            v = w
        out.append(total + e[v, 0])
    return MissionTimes(tuple(float(x) for x in out))


def count_solutions(n_prime: int, m: int) -> int:
    """Number of distinct plans: (n' + m - 1)! / (m - 1)!."""
    if n_prime < 0 or m < 1:
        raise ValueError("need n' >= 0 and m >= 1")
    return math.perm(n_prime + m - 1, n_prime)


def read_scenarios(path) -> list[Scenario]:
    """Read JSON-lines (one scenario per line) or a JSON list."""
    with open(path) as f:
        text = f.read()
    stripped = text.lstrip()
    if stripped.startswith("["):
        return [Scenario.from_dict(d) for d in json.loads(stripped)]
    return [Scenario.from_json(line) for line in text.splitlines() if line.strip()]


def write_scenarios(path, scenarios: Iterable[Scenario]) -> None:
    with open(path, "w") as f:
        for s in scenarios:
            f.write(s.to_json() + "\n")

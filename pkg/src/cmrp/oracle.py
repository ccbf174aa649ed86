"""Brute-force and sampling reference solvers (Opt-P, Med-P, Med-S).

Route costs here are computed from raw coordinates with their own code path so
they can be used to cross-check :func:`cmrp.core.mission_times`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import Plan, Scenario, count_solutions

DEFAULT_CAP = 10**8
_CHUNK_ELEMS = 1 << 21


class PopulationTooLarge(RuntimeError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"plan population {count} exceeds cap {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class PopulationStats:
    optimal_time: float
    optimal_plan: Plan
    median_time: float
    population_size: int
    plans_visited: int


@dataclass(frozen=True)
class _Geometry:
    start_to: np.ndarray  # (m, n') travel start_k -> sub-task j plus its time cost
    start_home: np.ndarray  # (m,) start_k -> depot
    between: np.ndarray  # (n', n') travel i -> j plus time cost of j
    home: np.ndarray  # (n',) sub-task -> depot


def _geometry(scenario: Scenario) -> _Geometry:
    depot = np.array([scenario.depot.x, scenario.depot.y])
    starts = np.array([[p.x, p.y] for p in scenario.starts]).reshape(-1, 2)
    locs, times = [], []
    for task in scenario.tasks:
        for _ in range(scenario.discretization):
            locs.append((task.location.x, task.location.y))
            times.append(task.time_cost / scenario.discretization)
    locs = np.array(locs, dtype=float).reshape(-1, 2)
    times = np.array(times, dtype=float)
    v = scenario.speed

    def dist(a, b):
        return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)) / v

    return _Geometry(
        start_to=dist(starts, locs) + times[None, :],
        start_home=dist(starts, depot[None])[:, 0],
        between=dist(locs, locs) + times[None, :],
        home=dist(locs, depot[None])[:, 0],
    )


def _cut_bounds(n_prime: int, m: int) -> np.ndarray:
    """(C, m+1) route boundaries: route k covers permutation slots [b[k], b[k+1])."""
    cuts = list(itertools.combinations_with_replacement(range(n_prime + 1), m - 1))
    b = np.zeros((len(cuts), m + 1), dtype=np.int64)
    if m > 1:
        b[:, 1:m] = np.array(cuts, dtype=np.int64).reshape(len(cuts), m - 1)
    b[:, m] = n_prime
    return b


def iter_plans(n_prime: int, m: int) -> Iterator[Plan]:
    """Every plan exactly once, in the same order as :func:`population_times`."""
    bounds = _cut_bounds(n_prime, m)
    for perm in itertools.permutations(range(n_prime)):
        for b in bounds:
            yield Plan(tuple(perm[b[k] : b[k + 1]] for k in range(m)))


def _perm_chunks(n_prime: int, size: int) -> Iterator[np.ndarray]:
    it = itertools.permutations(range(n_prime))
    while True:
        chunk = list(itertools.islice(it, size))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.int64).reshape(len(chunk), n_prime)


def _chunk_times(geo: _Geometry, perms: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    K, n = perms.shape
    m = bounds.shape[1] - 1
    if n == 0:
        return np.full((K, len(bounds)), geo.start_home.max())
    legs = geo.between[perms[:, :-1], perms[:, 1:]]
    inner = np.zeros((K, n))
    np.cumsum(legs, axis=1, out=inner[:, 1:])
    last = geo.home[perms]
    worst = np.full((K, len(bounds)), -np.inf)
    for k in range(m):
        a, b = bounds[:, k], bounds[:, k + 1]
        empty = a == b
        a_ = np.minimum(a, n - 1)
        e_ = np.maximum(b - 1, 0)
        first = geo.start_to[k][perms]
        cost = first[:, a_] + inner[:, e_] - inner[:, a_] + last[:, e_]
        cost = np.where(empty[None, :], geo.start_home[k], cost)
        np.maximum(worst, cost, out=worst)
    return worst


def population_times(scenario: Scenario) -> np.ndarray:
    """Max mission time of every plan, in :func:`iter_plans` order."""
    geo = _geometry(scenario)
    n, m = scenario.n_subtasks, scenario.n_agents
    bounds = _cut_bounds(n, m)
    per = max(1, _CHUNK_ELEMS // len(bounds))
    return np.concatenate([_chunk_times(geo, p, bounds).ravel() for p in _perm_chunks(n, per)])


def enumerate_population(scenario: Scenario, cap: int = DEFAULT_CAP) -> PopulationStats:
    n, m = scenario.n_subtasks, scenario.n_agents
    count = count_solutions(n, m)
    if count > cap:
        raise PopulationTooLarge(count, cap)
    geo = _geometry(scenario)
    bounds = _cut_bounds(n, m)
    per = max(1, _CHUNK_ELEMS // len(bounds))
    parts = []
    best, best_plan = np.inf, None
    for perms in _perm_chunks(n, per):
        times = _chunk_times(geo, perms, bounds)
        parts.append(times.ravel())
        i = int(np.argmin(times))
        if times.flat[i] < best:
            best = float(times.flat[i])
            p, c = divmod(i, len(bounds))
            b = bounds[c]
            best_plan = Plan(tuple(tuple(perms[p, b[k] : b[k + 1]]) for k in range(m)))
    all_times = np.concatenate(parts)
    visited = all_times.size
    mid = (visited - 1) // 2  # lower-middle element for even populations
    median = float(np.partition(all_times, mid)[mid])
    return PopulationStats(best, best_plan, median, count, visited)


def random_plan(scenario: Scenario, rng: np.random.Generator) -> Plan:
    """Uniform draw over the plan population: random order, then uniform separator placement."""
    n, m = scenario.n_subtasks, scenario.n_agents
    order = rng.permutation(n)
    slots = np.sort(rng.choice(n + m - 1, size=m - 1, replace=False)) if m > 1 else np.empty(0, int)
    cuts = [0, *(int(s) - i for i, s in enumerate(slots)), n]
    return Plan(tuple(tuple(int(x) for x in order[cuts[k] : cuts[k + 1]]) for k in range(m)))


def plan_max_time(scenario: Scenario, plan: Plan, geo: _Geometry | None = None) -> float:
    geo = geo or _geometry(scenario)
    worst = 0.0
    for k, route in enumerate(plan.routes):
        if not route:
            cost = geo.start_home[k]
        else:
            cost = geo.start_to[k, route[0]]
            for a, b in zip(route[:-1], route[1:]):
                cost += geo.between[a, b]
            cost += geo.home[route[-1]]
        worst = max(worst, float(cost))
    return worst


def sample_median(scenario: Scenario, k: int = 101, rng: np.random.Generator | None = None) -> float:
    if k < 1 or k % 2 == 0:
        raise ValueError(f"sample size must be odd, got {k}")
    rng = rng if rng is not None else np.random.default_rng(0)
    geo = _geometry(scenario)
    times = [plan_max_time(scenario, random_plan(scenario, rng), geo) for _ in range(k)]
    return float(np.median(times))

"""Greedy insertion plus min-max local search.

Moves are accepted when they lexicographically decrease the per-agent time
vector sorted in descending order, so a move that shortens a non-critical
route still counts as progress and the search does not stall on max plateaus.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..core import Plan, Scenario, build_cost_matrix

TWO_OPT = "2opt"
OR_OPT = "oropt"
RELOCATE = "relocate"
SWAP = "swap"
ALL_NEIGHBORHOODS = (RELOCATE, SWAP, TWO_OPT, OR_OPT)

EPS = 1e-9


@dataclass(frozen=True)
class SearchConfig:
    max_iterations: int = 10_000
    neighborhoods: tuple[str, ...] = ALL_NEIGHBORHOODS
    time_budget: float = 30.0
    seed: int = 0
    # perturbation rounds of the iterated search in solve(); 0 = plain descent
    perturbations: int = 20
    kick_size: int = 3

    def __post_init__(self):
        if not self.neighborhoods:
            raise ValueError("at least one neighborhood must be enabled")
        unknown = set(self.neighborhoods) - set(ALL_NEIGHBORHOODS)
        if unknown:
            raise ValueError(f"unknown neighborhoods {sorted(unknown)}")
        if self.max_iterations <= 0 or self.time_budget <= 0:
            raise ValueError("budgets must be positive")


class _Evaluator:
    def __init__(self, scenario: Scenario):
        e = build_cost_matrix(scenario).entries
        self.m = scenario.n_agents
        self.off = self.m + 1
        # sub-task index space only; starts are handled per agent
        self.between = e[self.off :, self.off :].tolist()
        self.from_start = e[1 : self.off, self.off :].tolist()
        self.home = e[self.off :, 0].tolist()
        self.start_home = e[1 : self.off, 0].tolist()

    def route_time(self, k: int, route) -> float:
        if not route:
            return self.start_home[k]
        between = self.between
        total = self.from_start[k][route[0]]
        prev = route[0]
        for s in route[1:]:
            total += between[prev][s]
            prev = s
        return total + self.home[prev]


def _key(times) -> tuple:
    return tuple(sorted(times, reverse=True))


def _better(new: tuple, old: tuple) -> bool:
    for a, b in zip(new, old):
        if a < b - EPS:
            return True
        if a > b + EPS:
            return False
    return False


def construct(scenario: Scenario) -> Plan:
    """Insert sub-tasks in index order where the resulting max time is smallest.

    Ties go to the lowest agent index, then the lowest insertion position.
    """
    ev = _Evaluator(scenario)
    m = scenario.n_agents
    routes: list[list[int]] = [[] for _ in range(m)]
    times = [ev.route_time(k, []) for k in range(m)]
    for s in range(scenario.n_subtasks):
        best = None
        for k in range(m):
            others = max((times[j] for j in range(m) if j != k), default=0.0)
            for pos in range(len(routes[k]) + 1):
                cand = routes[k][:pos] + [s] + routes[k][pos:]
                t = ev.route_time(k, cand)
                value = max(others, t)
                if best is None or value < best[0] - EPS:
                    best = (value, k, cand, t)
        _, k, cand, t = best
        routes[k] = cand
        times[k] = t
    return Plan(tuple(tuple(r) for r in routes))


class _Search:
    def __init__(self, ev: _Evaluator, routes, config: SearchConfig, deadline: float):
        self.ev = ev
        self.routes = [list(r) for r in routes]
        self.times = [ev.route_time(k, r) for k, r in enumerate(self.routes)]
        self.config = config
        self.deadline = deadline
        self.iterations = 0
        self.history: list[tuple] = [_key(self.times)]

    def _try(self, changes: dict[int, list[int]]) -> bool:
        times = list(self.times)
        for k, r in changes.items():
            times[k] = self.ev.route_time(k, r)
        key = _key(times)
        if _better(key, self.history[-1]):
            for k, r in changes.items():
                self.routes[k] = r
            self.times = times
            self.history.append(key)
            self.iterations += 1
            return True
        return False

    def two_opt(self) -> bool:
        for k, r in enumerate(self.routes):
            L = len(r)
            for i in range(L - 1):
                for j in range(i + 1, L):
                    if self._try({k: r[:i] + r[i : j + 1][::-1] + r[j + 1 :]}):
                        return True
        return False

    def or_opt(self) -> bool:
        for k, r in enumerate(self.routes):
            L = len(r)
            for seg in (1, 2, 3):
                for i in range(L - seg + 1):
                    piece = r[i : i + seg]
                    rest = r[:i] + r[i + seg :]
                    for p in range(len(rest) + 1):
                        if p == i:
                            continue
                        if self._try({k: rest[:p] + piece + rest[p:]}):
                            return True
        return False

    def relocate(self) -> bool:
        routes = self.routes
        for a, ra in enumerate(routes):
            for i in range(len(ra)):
                rest = ra[:i] + ra[i + 1 :]
                s = ra[i]
                for b, rb in enumerate(routes):
                    if b == a:
                        continue
                    for p in range(len(rb) + 1):
                        if self._try({a: rest, b: rb[:p] + [s] + rb[p:]}):
                            return True
        return False

    def swap(self) -> bool:
        routes = self.routes
        for a in range(len(routes)):
            for b in range(a + 1, len(routes)):
                ra, rb = routes[a], routes[b]
                for i in range(len(ra)):
                    for j in range(len(rb)):
                        na, nb = list(ra), list(rb)
                        na[i], nb[j] = rb[j], ra[i]
                        if self._try({a: na, b: nb}):
                            return True
        return False

    def descend(self):
        moves = {TWO_OPT: self.two_opt, OR_OPT: self.or_opt, RELOCATE: self.relocate, SWAP: self.swap}
        order = [moves[n] for n in self.config.neighborhoods]
        while self.iterations < self.config.max_iterations and time.perf_counter() < self.deadline:
            if not any(move() for move in order):
                break


def improve(scenario: Scenario, plan: Plan, config: SearchConfig = SearchConfig()) -> Plan:
    search = _Search(_Evaluator(scenario), plan.routes, config, time.perf_counter() + config.time_budget)
    search.descend()
    return Plan(tuple(tuple(r) for r in search.routes))


def improve_trace(scenario: Scenario, plan: Plan, config: SearchConfig = SearchConfig()) -> tuple[Plan, list[tuple]]:
    """Like :func:`improve` but also returns the accepted key after every move."""
    search = _Search(_Evaluator(scenario), plan.routes, config, time.perf_counter() + config.time_budget)
    search.descend()
    return Plan(tuple(tuple(r) for r in search.routes)), search.history


def _kick(routes, rng: np.random.Generator, size: int):
    routes = [list(r) for r in routes]
    flat = [(k, s) for k, r in enumerate(routes) for s in r]
    if not flat:
        return routes
    picked = rng.choice(len(flat), size=min(size, len(flat)), replace=False)
    moving = [flat[i][1] for i in picked]
    for k, r in enumerate(routes):
        routes[k] = [s for s in r if s not in moving]
    for s in moving:
        k = int(rng.integers(len(routes)))
        routes[k].insert(int(rng.integers(len(routes[k]) + 1)), s)
    return routes


def solve(scenario: Scenario, config: SearchConfig = SearchConfig(), initial: Plan | None = None) -> Plan:
    """Greedy construction (or ``initial``), descent, then perturb-and-descend rounds keeping the best.

    Never returns a plan worse than its starting plan.
    """
    ev = _Evaluator(scenario)
    deadline = time.perf_counter() + config.time_budget
    rng = np.random.default_rng(config.seed)
    start = construct(scenario) if initial is None else initial
    search = _Search(ev, start.routes, config, deadline)
    search.descend()
    best_routes, best_key = search.routes, _key(search.times)
    for _ in range(config.perturbations):
        if time.perf_counter() >= deadline:
            break
        trial = _Search(ev, _kick(best_routes, rng, config.kick_size), config, deadline)
        trial.descend()
        key = _key(trial.times)
        if _better(key, best_key):
            best_routes, best_key = trial.routes, key
    return Plan(tuple(tuple(r) for r in best_routes))

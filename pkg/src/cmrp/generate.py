"""Random scenario generation, mixed-size batches and padding."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import Point2D, Scenario, Task

IntOrRange = int | tuple[int, int]


def _bounds(v: IntOrRange) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        lo, hi = int(v[0]), int(v[1])
    else:
        lo = hi = int(v)
    if lo > hi:
        raise ValueError(f"empty range {v}")
    return lo, hi


@dataclass(frozen=True)
class GeneratorConfig:
    domain_size: float = 10.0
    time_cost_range: tuple[float, float] = (1.0, 10.0)
    n_tasks: IntOrRange = 4
    n_agents: IntOrRange = 3
    delta: IntOrRange = 2
    seed: int = 0
    # ablation switches for the simpler problem types
    starts_at_depot: bool = False
    zero_time_costs: bool = False
    speed: float = 1.0

    def __post_init__(self):
        lo, hi = self.time_cost_range
        if lo < 0 or lo > hi:
            raise ValueError(f"bad time cost range {self.time_cost_range}")
        if self.domain_size <= 0:
            raise ValueError("domain size must be positive")
        n_lo, _ = _bounds(self.n_tasks)
        m_lo, _ = _bounds(self.n_agents)
        d_lo, _ = _bounds(self.delta)
        if n_lo < 0 or m_lo < 1 or d_lo < 1:
            raise ValueError("need n >= 0, m >= 1, delta >= 1")

    @property
    def v_max(self) -> int:
        return _bounds(self.n_tasks)[1] * _bounds(self.delta)[1] + _bounds(self.n_agents)[1] + 1

    @property
    def m_max(self) -> int:
        return _bounds(self.n_agents)[1]

    def sizes(self) -> list[tuple[int, int, int]]:
        """All (n, m, delta) combinations the config can produce."""
        n_lo, n_hi = _bounds(self.n_tasks)
        m_lo, m_hi = _bounds(self.n_agents)
        d_lo, d_hi = _bounds(self.delta)
        return [
            (n, m, d)
            for n in range(n_lo, n_hi + 1)
            for m in range(m_lo, m_hi + 1)
            for d in range(d_lo, d_hi + 1)
        ]


# The five problem types of increasing complexity, all three agents / four tasks.
PRESETS: dict[str, GeneratorConfig] = {
    "mtsp": GeneratorConfig(delta=1, starts_at_depot=True, zero_time_costs=True),
    "mtsp-starts": GeneratorConfig(delta=1, zero_time_costs=True),
    "mtsp-times": GeneratorConfig(delta=1, starts_at_depot=True),
    "mtsp-starts-times": GeneratorConfig(delta=1),
    "cmrp": GeneratorConfig(delta=2),
}


def instance_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for instance ``index`` of the batch seeded by ``seed``."""
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) + int(index)))


def generate(config: GeneratorConfig, rng: np.random.Generator | None = None) -> Scenario:
    if rng is None:
        rng = instance_rng(config.seed, 0)
    sizes = []
    for v in (config.n_tasks, config.n_agents, config.delta):
        lo, hi = _bounds(v)
        sizes.append(lo if lo == hi else int(rng.integers(lo, hi + 1)))
    n, m, delta = sizes
    L = config.domain_size
    depot = rng.uniform(0.0, L, size=2)
    starts = rng.uniform(0.0, L, size=(m, 2))
    locs = rng.uniform(0.0, L, size=(n, 2))
    times = rng.uniform(*config.time_cost_range, size=n)
    if config.starts_at_depot:
        starts[:] = depot
    if config.zero_time_costs:
        times[:] = 0.0
    return Scenario(
        depot=Point2D(float(depot[0]), float(depot[1])),
        starts=tuple(Point2D(float(x), float(y)) for x, y in starts),
        tasks=tuple(Task(Point2D(float(x), float(y)), float(t)) for (x, y), t in zip(locs, times)),
        discretization=delta,
        speed=config.speed,
    )


def generate_batch(config: GeneratorConfig, count: int, seed: int | None = None) -> list[Scenario]:
    seed = config.seed if seed is None else seed
    return [generate(config, instance_rng(seed, i)) for i in range(count)]


@dataclass(frozen=True)
class PaddedScenario:
    scenario: Scenario
    v_max: int
    pad_mask: np.ndarray  # True for real vertices

    @property
    def n_real(self) -> int:
        return self.scenario.n_vertices


def pad(scenario: Scenario, v_max: int) -> PaddedScenario:
    v = scenario.n_vertices
    if v > v_max:
        raise ValueError(f"scenario has {v} vertices, more than v_max={v_max}")
    mask = np.zeros(v_max, dtype=bool)
    mask[:v] = True
    mask.setflags(write=False)
    return PaddedScenario(scenario, v_max, mask)


def generate_mixed(config: GeneratorConfig, count: int, seed: int | None = None) -> list[PaddedScenario]:
    """Sizes drawn uniformly and independently per instance, all padded to ``config.v_max``."""
    v_max = config.v_max
    return [pad(s, v_max) for s in generate_batch(config, count, seed)]


def with_sizes(config: GeneratorConfig, n: IntOrRange, m: IntOrRange, delta: IntOrRange) -> GeneratorConfig:
    return replace(config, n_tasks=n, n_agents=m, delta=delta)

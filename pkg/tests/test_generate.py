import itertools

import numpy as np
import pytest

from cmrp.core import Plan, validate_plan
from cmrp.generate import (
    PRESETS,
    GeneratorConfig,
    generate,
    generate_batch,
    generate_mixed,
    instance_rng,
    pad,
)


def test_deterministic():
    cfg = GeneratorConfig(seed=42)
    assert generate(cfg) == generate(cfg)
    a = [s.to_json() for s in generate_batch(cfg, 20)]
    b = [s.to_json() for s in generate_batch(cfg, 20)]
    assert a == b


def test_instances_independent_of_batch_size():
    cfg = GeneratorConfig()
    assert generate_batch(cfg, 5, seed=3)[4] == generate_batch(cfg, 50, seed=3)[4]
    # seeds do not alias instance counters
    assert generate_batch(cfg, 2, seed=0)[1] != generate_batch(cfg, 1, seed=1)[0]


def test_bounds_and_time_mean():
    cfg = GeneratorConfig(n_tasks=1, n_agents=1, delta=1)
    scen = generate_batch(cfg, 10_000, seed=1)
    times = np.array([s.tasks[0].time_cost for s in scen])
    assert 5.0 <= times.mean() <= 6.0
    assert times.min() >= 1.0 and times.max() <= 10.0
    coords = np.array([[p.x, p.y] for s in scen for p in s.vertex_points()])
    assert coords.min() >= 0.0 and coords.max() <= 10.0


def test_three_agent_four_task_vertex_count():
    s = generate(GeneratorConfig(n_tasks=4, n_agents=3, delta=2))
    assert s.n_subtasks == 8
    assert s.n_vertices == 12


def test_mixed_vmax_and_coverage():
    cfg = GeneratorConfig(n_tasks=(1, 6), n_agents=(1, 6), delta=(1, 4))
    items = generate_mixed(cfg, 1000, seed=0)
    assert {p.v_max for p in items} == {31}
    seen = {(p.scenario.n_tasks, p.scenario.n_agents, p.scenario.discretization) for p in items}
    assert seen == set(itertools.product(range(1, 7), range(1, 7), range(1, 5)))
    for p in items:
        assert p.pad_mask.sum() == p.scenario.n_vertices
        assert p.pad_mask[: p.scenario.n_vertices].all()


def test_fixed_range_mask():
    items = generate_mixed(GeneratorConfig(n_tasks=4, n_agents=3, delta=2), 3)
    for p in items:
        assert p.v_max == 12 and p.pad_mask.all()


def test_pad():
    s = generate(GeneratorConfig())
    assert pad(s, s.n_vertices).pad_mask.all()
    p = pad(s, s.n_vertices + 3)
    assert (~p.pad_mask).sum() == 3
    with pytest.raises(ValueError):
        pad(s, s.n_vertices - 1)


def test_presets():
    mtsp = generate(PRESETS["mtsp"], instance_rng(0, 0))
    assert all(p == mtsp.depot for p in mtsp.starts)
    assert all(t.time_cost == 0 for t in mtsp.tasks)
    cmrp = generate(PRESETS["cmrp"], instance_rng(0, 0))
    assert cmrp.n_subtasks == 8
    # same random stream, so task locations agree across presets
    assert [t.location for t in mtsp.tasks] == [t.location for t in cmrp.tasks]


def test_generated_indices_consistent():
    for s in generate_batch(GeneratorConfig(n_tasks=(0, 3), n_agents=(1, 3), delta=(1, 2)), 50):
        plan = Plan(tuple([tuple(range(s.n_subtasks))] + [()] * (s.n_agents - 1)))
        assert validate_plan(s, plan)


def test_bad_configs():
    with pytest.raises(ValueError):
        GeneratorConfig(n_tasks=(3, 1))
    with pytest.raises(ValueError):
        GeneratorConfig(time_cost_range=(-1, 2))
    with pytest.raises(ValueError):
        GeneratorConfig(n_agents=0)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmrp.core import (
    InfeasiblePlanError,
    Plan,
    Point2D,
    Scenario,
    Task,
    VertexRole,
    build_cost_matrix,
    count_solutions,
    discretize,
    mission_times,
    mission_times_from_matrix,
    validate_plan,
)
from cmrp.generate import GeneratorConfig, generate, instance_rng
from cmrp.oracle import iter_plans, random_plan


def line_scenario():
    return Scenario(Point2D(0, 0), (Point2D(0, 0),), (Task(Point2D(3, 4), 2.0),), 1)


def test_cost_matrix_345_triangle():
    cm = build_cost_matrix(line_scenario())
    # vertices: depot 0, start 1, sub-task 2
    assert cm.entries[1, 2] == 7.0
    assert cm.entries[2, 0] == 5.0
    assert cm.roles == (VertexRole.DEPOT, VertexRole.START, VertexRole.SUBTASK)


def test_cost_matrix_constraints():
    s = generate(GeneratorConfig(n_tasks=4, n_agents=3, delta=2), instance_rng(5, 0))
    e = build_cost_matrix(s).entries
    m = s.n_agents
    times = s.vertex_time_costs()
    for j in range(1, e.shape[0]):
        assert e[0, j] == times[j]
    for i in range(1, e.shape[0]):
        for k in range(1, m + 1):
            assert e[i, k] == math.inf
    assert not np.array_equal(e, e.T)
    assert not e.flags.writeable


def test_cost_matrix_asymmetric_time_costs():
    s = Scenario(Point2D(0, 0), (Point2D(0, 0),), (Task(Point2D(1, 0), 1.0), Task(Point2D(2, 0), 5.0)))
    e = build_cost_matrix(s).entries
    assert e[2, 3] == pytest.approx(1 + 5)
    assert e[3, 2] == pytest.approx(1 + 1)


def test_discretize():
    subs = discretize([Task(Point2D(1, 1), 10.0)], 2)
    assert [s.time_cost for s in subs] == [5.0, 5.0]
    assert all(s.location == Point2D(1, 1) and s.parent_task == 0 for s in subs)
    assert [s.time_cost for s in discretize([Task(Point2D(0, 0), 7.0)], 1)] == [7.0]
    tasks = [Task(Point2D(i, i), i + 1.0) for i in range(4)]
    assert len(discretize(tasks, 2)) == 8
    with pytest.raises(ValueError):
        discretize(tasks, 0)


@given(t=st.floats(0, 1e3, allow_nan=False), delta=st.integers(1, 16))
def test_discretize_sums_to_parent(t, delta):
    subs = discretize([Task(Point2D(0, 0), t)], delta)
    total = math.fsum(s.time_cost for s in subs)
    assert abs(total - t) <= math.ulp(t) * delta or total == t


def test_mission_times_examples():
    assert mission_times(line_scenario(), Plan(((0,),))).per_agent == (12.0,)
    s = Scenario(Point2D(2, 2), (Point2D(2, 2), Point2D(0, 0)), (Task(Point2D(1, 1), 1.0),))
    mt = mission_times(s, Plan(((), (0,))))
    assert mt.per_agent[0] == 0.0
    assert mt.max_time == max(mt.per_agent)


def test_mission_times_rejects_infeasible():
    with pytest.raises(InfeasiblePlanError, match="missing"):
        mission_times(line_scenario(), Plan(((),)))


def test_validate_plan_rules():
    s = generate(GeneratorConfig(n_tasks=2, n_agents=2, delta=1), instance_rng(0, 0))
    assert validate_plan(s, Plan(((0,), (1,))))
    assert validate_plan(s, Plan(((0, 0), (1,)))).rule == "duplicate"
    assert validate_plan(s, Plan(((0,), ()))).rule == "missing"
    assert validate_plan(s, Plan(((0, 5), (1,)))).rule == "out_of_range"
    assert validate_plan(s, Plan(((0, 1),))).rule == "wrong_route_count"


def test_count_solutions():
    assert count_solutions(1, 1) == 1
    assert count_solutions(3, 2) == 24
    assert count_solutions(8, 3) == 1_814_400
    for n in range(11):
        assert count_solutions(n, 1) == math.factorial(n)


@pytest.mark.parametrize("n,m", [(0, 1), (0, 3), (1, 1), (3, 2), (4, 1), (2, 3), (4, 3)])
def test_count_matches_enumeration(n, m):
    plans = list(iter_plans(n, m))
    assert len(plans) == count_solutions(n, m)
    assert len(set(plans)) == len(plans)


def _random_scenario(seed, n=4, m=3, delta=1):
    return generate(GeneratorConfig(n_tasks=n, n_agents=m, delta=delta), instance_rng(seed, 0))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_matrix_and_geometry_evaluations_agree(seed):
    s = _random_scenario(seed, n=3, m=2, delta=2)
    plan = random_plan(s, np.random.default_rng(seed))
    a = mission_times(s, plan)
    b = mission_times_from_matrix(build_cost_matrix(s), plan)
    assert np.allclose(a.per_agent, b.per_agent, atol=1e-9, rtol=0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_max_time_at_least_direct_return(seed):
    s = _random_scenario(seed)
    plan = random_plan(s, np.random.default_rng(seed))
    bound = max(p.distance(s.depot) for p in s.starts) / s.speed
    assert mission_times(s, plan).max_time >= bound - 1e-12


def test_swapping_within_route_only_changes_that_agent():
    s = _random_scenario(3, n=5, m=3)
    plan = Plan(((0, 1, 2), (3,), (4,)))
    swapped = Plan(((1, 0, 2), (3,), (4,)))
    a, b = mission_times(s, plan), mission_times(s, swapped)
    assert a.per_agent[1:] == b.per_agent[1:]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(0.1, 10))
def test_scaling_coordinates(seed, c):
    s = _random_scenario(seed)
    zero = Scenario(s.depot, s.starts, tuple(Task(t.location, 0.0) for t in s.tasks))

    def scaled(sc):
        sp = lambda p: Point2D(p.x * c, p.y * c)
        return Scenario(sp(sc.depot), tuple(sp(p) for p in sc.starts),
                        tuple(Task(sp(t.location), t.time_cost) for t in sc.tasks))

    plan = random_plan(s, np.random.default_rng(seed))
    base, big = mission_times(zero, plan), mission_times(scaled(zero), plan)
    assert big.max_time == pytest.approx(c * base.max_time, rel=1e-12)
    # with time costs, only the travel part scales
    tcost = sum(s.tasks[i].time_cost for i in plan.routes[0])
    a, b = mission_times(s, plan).per_agent[0], mission_times(scaled(s), plan).per_agent[0]
    assert b - tcost == pytest.approx(c * (a - tcost), rel=1e-9, abs=1e-9)


def test_json_round_trip():
    s = _random_scenario(9, n=3, m=2, delta=3)
    assert Scenario.from_json(s.to_json()) == s
    p = Plan(((2, 0), (), (1,)))
    assert Plan.from_dict(p.to_dict()) == p
    assert "Infinity" not in s.to_json()


def test_giant_tour_conversion():
    p = Plan(((2, 0), (), (1,)))
    assert Plan.from_giant_tour(p.to_giant_tour(), 3) == p


def test_invalid_scenarios():
    with pytest.raises(ValueError):
        Scenario(Point2D(0, 0), (), ())
    with pytest.raises(ValueError):
        Scenario(Point2D(0, 0), (Point2D(0, 0),), (), discretization=0)
    with pytest.raises(ValueError):
        Task(Point2D(0, 0), -1.0)
    with pytest.raises(ValueError):
        Point2D(float("nan"), 0)

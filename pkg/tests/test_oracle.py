import collections

import numpy as np
import pytest
from scipy import stats

from cmrp.core import Plan, Point2D, Scenario, Task, count_solutions, mission_times
from cmrp.generate import GeneratorConfig, generate, instance_rng
from cmrp.oracle import (
    PopulationTooLarge,
    enumerate_population,
    iter_plans,
    plan_max_time,
    population_times,
    random_plan,
    sample_median,
)


def scen(seed, n, m, delta=1):
    return generate(GeneratorConfig(n_tasks=n, n_agents=m, delta=delta), instance_rng(seed, 0))


def test_single_agent_two_subtasks():
    s = Scenario(Point2D(0, 0), (Point2D(0, 0),), (Task(Point2D(1, 0), 1.0), Task(Point2D(5, 0), 1.0)))
    stats_ = enumerate_population(s)
    assert stats_.plans_visited == 2
    a = mission_times(s, Plan(((0, 1),))).max_time
    b = mission_times(s, Plan(((1, 0),))).max_time
    assert stats_.optimal_time == min(a, b)
    assert stats_.median_time == min(a, b)  # lower-middle of two


def test_counts_small_instances():
    for n in range(0, 7):
        for m in range(1, 4):
            if count_solutions(n, m) > 200_000:
                continue
            s = scen(n * 10 + m, n, m)
            assert enumerate_population(s).plans_visited == count_solutions(n, m)
    assert enumerate_population(scen(1, 3, 2)).plans_visited == 24


def test_three_agents_eight_subtasks_population():
    s = scen(0, 4, 3, delta=2)
    st_ = enumerate_population(s)
    assert st_.plans_visited == st_.population_size == 1_814_400
    assert st_.optimal_time <= st_.median_time
    assert mission_times(s, st_.optimal_plan).max_time == pytest.approx(st_.optimal_time, abs=1e-9)


def test_cap_refuses_with_count():
    with pytest.raises(PopulationTooLarge) as err:
        enumerate_population(scen(0, 4, 3, delta=2), cap=1000)
    assert err.value.count == 1_814_400


@pytest.mark.parametrize("n,m,delta", [(2, 2, 2), (3, 3, 1), (5, 1, 1), (1, 3, 2)])
def test_per_plan_costs_match_core(n, m, delta):
    s = scen(n + m + delta, n, m, delta)
    times = population_times(s)
    for plan, t in zip(iter_plans(s.n_subtasks, m), times):
        assert abs(mission_times(s, plan).max_time - t) <= 1e-9


def test_median_is_lower_middle():
    s = scen(4, 2, 2)
    times = np.sort(population_times(s))
    assert len(times) == 6
    assert enumerate_population(s).median_time == times[2]


def test_random_plan_empty():
    s = Scenario(Point2D(0, 0), (Point2D(1, 1), Point2D(2, 2)), ())
    assert random_plan(s, np.random.default_rng(0)).routes == ((), ())


def test_random_plan_two_orderings():
    s = scen(0, 2, 1)
    rng = np.random.default_rng(1)
    counts = collections.Counter(random_plan(s, rng) for _ in range(100_000))
    assert len(counts) == 2
    for c in counts.values():
        assert abs(c / 100_000 - 0.5) < 0.02


def test_random_plan_uniform_over_population():
    s = scen(0, 3, 2)
    rng = np.random.default_rng(2)
    draws = 1_000_000
    counts = collections.Counter(random_plan(s, rng) for _ in range(draws))
    support = list(iter_plans(3, 2))
    assert set(counts) == set(support)
    observed = [counts[p] for p in support]
    assert stats.chisquare(observed).pvalue > 1e-3
    assert max(abs(c / draws - 1 / 24) for c in observed) < 0.002


def test_sample_median_basics():
    s = scen(3, 3, 2, delta=2)
    rng = np.random.default_rng(0)
    one = sample_median(s, 1, np.random.default_rng(5))
    plan = random_plan(s, np.random.default_rng(5))
    assert one == plan_max_time(s, plan)
    assert sample_median(s, 101, np.random.default_rng(7)) == sample_median(s, 101, np.random.default_rng(7))
    with pytest.raises(ValueError):
        sample_median(s, 100, rng)


def test_sample_median_tracks_population_median():
    s = scen(11, 3, 3, delta=1)
    med_p = enumerate_population(s).median_time
    rng = np.random.default_rng(3)
    meds = [sample_median(s, 101, rng) for _ in range(200)]
    assert abs(np.mean(meds) - med_p) / med_p < 0.05


def test_optimum_below_every_sample():
    s = scen(21, 3, 2, delta=2)
    opt = enumerate_population(s).optimal_time
    rng = np.random.default_rng(0)
    assert all(plan_max_time(s, random_plan(s, rng)) >= opt - 1e-12 for _ in range(500))

import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cmrp import bench, plot
from cmrp.bench import (
    MED_P,
    MED_S,
    NOPT,
    OPT_P,
    DegenerateBenchmark,
    EvalRecord,
    SweepConfig,
    cumulative_curve,
    normalized_mission_time,
    normalized_runtime,
    normalized_values,
    run_sweep,
    threshold_proportions,
    time_call,
    write_records_csv,
    write_summary_csv,
)
from cmrp.core import Plan, Point2D, Scenario, Task
from cmrp.generate import PRESETS, generate
from cmrp.heuristic.local_search import solve
from conftest import tiny_model


def test_normalized_mission_time_examples():
    assert normalized_mission_time(10.0, 10.0, 20.0) == 0.0
    assert normalized_mission_time(20.0, 10.0, 20.0) == 1.0
    assert normalized_mission_time(9.0, 10.0, 20.0) < 0
    with pytest.raises(DegenerateBenchmark):
        normalized_mission_time(3.0, 5.0, 5.0)


def test_cumulative_curve_examples():
    assert all(f == 1.0 for _, f in cumulative_curve([0, 0, 0], [0.01, 0.5, 2]))
    assert cumulative_curve([0.2, 0.4], [0.1])[0][1] == 0.0
    assert cumulative_curve([0.1], [0.1])[0][1] == 0.0  # strictly below
    with pytest.raises(ValueError):
        cumulative_curve([], [0.1])


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=50), st.lists(st.floats(-3, 3), min_size=1, max_size=20))
def test_cumulative_curve_monotone_bounded(values, thresholds):
    curve = cumulative_curve(values, sorted(thresholds))
    fracs = [f for _, f in curve]
    assert all(0.0 <= f <= 1.0 for f in fracs)
    assert fracs == sorted(fracs)


def test_threshold_proportions():
    p = threshold_proportions([0.005, 0.05, 0.5])
    assert p[0.01] == pytest.approx(1 / 3) and p[0.1] == pytest.approx(2 / 3)
    assert p[0.01] <= p[0.1]
    with pytest.raises(ValueError):
        threshold_proportions([])


def test_normalized_runtime():
    assert normalized_runtime(2.0, 2.0) == 100.0
    assert normalized_runtime(0.007, 2.7) == pytest.approx(0.259, abs=1e-3)
    with pytest.raises(ValueError):
        normalized_runtime(1.0, 0.0)


def test_normalized_values_flags_degenerate():
    recs = [EvalRecord("a", 1, 1, 1, 0, 0, {"gatr": 5.0, OPT_P: 5.0, MED_P: 5.0}),
            EvalRecord("b", 1, 1, 1, 0, 1, {"gatr": 6.0, OPT_P: 5.0, MED_P: 7.0}),
            EvalRecord("c", 1, 1, 1, 0, 2, {"gatr": 6.0})]
    vals, flagged = normalized_values(recs, "gatr")
    assert vals == [0.5] and flagged == 1


def test_time_call_median():
    calls = []
    t = time_call(lambda: calls.append(1), repeats=3)
    assert t >= 0 and len(calls) == 4


SMALL = SweepConfig(cells=((2, 2, 1), (2, 3, 2)), instances_per_seed=6, seeds=(0, 1),
                    search=bench.SearchConfig(perturbations=3))


def test_sweep_ordering_and_determinism(tmp_path):
    model = tiny_model(0)
    r1 = run_sweep(SMALL, {"gatr": model})
    r2 = run_sweep(SMALL, {"gatr": model})
    assert r1.complete and len(r1.records) == 24
    for rec in r1.records:
        assert rec.times[OPT_P] <= rec.times[NOPT] + 1e-9
        assert rec.times[OPT_P] <= rec.times["gatr"] + 1e-9
        assert rec.times[OPT_P] <= rec.times[MED_P] + 1e-9
    for c in r1.cells:
        assert c.means[NOPT] <= c.means[MED_S]
        assert set(c.gap_pct) == {"gatr"}
    for name in ("a", "b"):
        r = r1 if name == "a" else r2
        write_records_csv(r, tmp_path / f"{name}_rec.csv", include_timing=False)
        write_summary_csv(r, tmp_path / f"{name}_sum.csv", include_timing=False)
    assert (tmp_path / "a_rec.csv").read_bytes() == (tmp_path / "b_rec.csv").read_bytes()
    assert (tmp_path / "a_sum.csv").read_bytes() == (tmp_path / "b_sum.csv").read_bytes()
    header = (tmp_path / "a_rec.csv").read_text().splitlines()[0]
    assert header.startswith("schema,instance_id,n,m,delta,seed,index,subtasks_per_agent")
    assert "mt_gatr" in header and "rt_" not in header


def test_sweep_skips_cells_without_model():
    cfg = SweepConfig(cells=((2, 2, 1), (3, 2, 1)), instances_per_seed=3, seeds=(0,),
                      solvers=(OPT_P, MED_P))
    result = run_sweep(cfg, {"specific": {(2, 2, 1): tiny_model(1)}})
    assert not result.complete
    assert result.skipped == [((3, 2, 1), "specific", "no model for this cell")]
    assert all("specific" in r.times for r in result.records if r.n == 2)


def test_sweep_timing_columns(tmp_path):
    cfg = SweepConfig(cells=((2, 2, 1),), instances_per_seed=2, seeds=(0,), timing_instances=1,
                      solvers=(NOPT,))
    result = run_sweep(cfg, {"gatr": tiny_model(2)})
    assert set(result.cells[0].wall_median) == {NOPT, "gatr"}
    write_records_csv(result, tmp_path / "r.csv")
    assert "rt_gatr" in (tmp_path / "r.csv").read_text()
    assert "torch" in result.hardware


def test_sweep_config_rejects_empty_grid():
    with pytest.raises(ValueError):
        SweepConfig(cells=())


def test_default_grid_has_27_cells():
    assert len(SweepConfig().cells) == 27


# figures


def small_scenario():
    return Scenario(Point2D(5, 5), (Point2D(1, 1), Point2D(9, 1)),
                    (Task(Point2D(2, 8), 3.0), Task(Point2D(8, 8), 9.0)))


def test_tour_svg_shapes_and_determinism(tmp_path):
    s = small_scenario()
    plans = {"a": Plan(((0, 1), ())), "b": Plan(((0,), (1,)))}
    plot.plot_tours(s, plans, tmp_path / "1.svg")
    plot.plot_tours(s, plans, tmp_path / "2.svg")
    text = (tmp_path / "1.svg").read_text()
    assert text == (tmp_path / "2.svg").read_text()
    assert text.count('class="depot"') == 2
    assert text.count('class="start"') == 4
    assert text.count('class="task"') == 4
    assert text.count('class="route"') == 4
    radii = [float(r) for r in re.findall(r'class="task" cx="[^"]+" cy="[^"]+" r="([^"]+)"', text)]
    assert radii[0] < radii[1]  # scaled by time cost


def test_empty_route_is_start_to_depot():
    svg = plot.tours_svg([("", small_scenario(), {"x": Plan(((0, 1), ()))})])
    lines = re.findall(r'data-agent="1" points="([^"]+)"', svg)
    assert len(lines) == 1 and len(lines[0].split()) == 2


def test_problem_type_ladder_renders():
    rows = []
    for name, cfg in PRESETS.items():
        s = generate(cfg)
        rows.append((name, s, {"NOpt": solve(s)}))
    svg = plot.tours_svg(rows)
    assert svg.count('class="panel"') == 5
    # starts coincide with the depot in the plain mTSP rows
    assert svg.count('class="start"') == 3 * 3


def test_curves_svg(tmp_path):
    series = {"a": cumulative_curve([0.0, 0.2, 0.5], np.linspace(0, 1, 5)), "b": [(0, 1.0), (1, 2.0)]}
    plot.plot_curves(series, tmp_path / "c.svg", "x", "y", title="t", step=True)
    text = (tmp_path / "c.svg").read_text()
    assert text.count("<polyline") == 2 and ">t</text>" in text

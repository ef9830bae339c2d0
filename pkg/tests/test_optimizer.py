import json

import numpy as np
import pytest

from energy_sched.analysis.optimizer import (
    SWEEP_COLUMNS,
    ObjectiveWeights,
    SweepCell,
    best_by_workflow,
    modal_reduction,
    read_sweep,
    sweep,
    sweet_spot,
    tradeoff_report,
    write_sweep,
    write_sweet_spots,
)
from energy_sched.errors import CoverageError, InvalidParameterError
from energy_sched.scheduler.calibration import DEFAULT_LEVEL_TARGETS
from energy_sched.synth.preprocessing import SyntheticRecord
from energy_sched.utils import REDUCTION_LEVELS, SchedulerKind


def _level(frame, pct):
    return frame[frame["reduction_pct"] == pct].iloc[0]


def test_grid_has_150_cells(sweep_grid):
    assert len(sweep_grid) == 150
    assert len({(c.scheduler, c.workflow, c.reduction) for c in sweep_grid}) == 150


def test_base_cells_reproduce_table3(sweep_grid, table3):
    cells = {(c.scheduler, c.workflow): c for c in sweep_grid if c.reduction == 0.0}
    for trace in table3:
        cell = cells[trace.key]
        assert cell.tat_ms == pytest.approx(trace.tat_ms, rel=0.01)
        assert cell.energy_kwh == pytest.approx(trace.energy_kwh, rel=0.01)


def test_fifteen_percent_cells_reproduce_table4(sweep_grid, table4):
    cells = {(c.scheduler, c.workflow): c for c in sweep_grid if c.reduction == 0.15}
    for trace in table4:
        if trace.reduction != 0.15:
            continue
        assert cells[trace.key].tat_ms == pytest.approx(trace.tat_ms, rel=0.02)
        assert cells[trace.key].energy_kwh == pytest.approx(trace.energy_kwh, rel=0.02)


def test_sweep_matches_simulate_grid(calibration, sweep_grid):
    assert sweep(calibration) == sweep_grid


def test_pure_energy_weight_picks_the_largest_reduction(sweep_grid):
    results = sweet_spot(sweep_grid, ObjectiveWeights(1.0, 0.0))
    assert len(results) == 30
    assert all(r.best_reduction == 0.20 for r in results)


def test_pure_time_weight_picks_base_frequency(sweep_grid):
    results = sweet_spot(sweep_grid, ObjectiveWeights(0.0, 1.0))
    assert all(r.best_reduction == 0.0 for r in results)
    assert all(r.tat_increase_pct == 0.0 and r.energy_saving_pct == 0.0 for r in results)


def test_equal_weights_match_brute_force(sweep_grid):
    results = sweet_spot(sweep_grid, ObjectiveWeights(0.5, 0.5))
    for r in results:
        cells = sorted(
            (c for c in sweep_grid if c.pair == (r.scheduler, r.workflow)), key=lambda c: c.reduction
        )
        energy = np.array([c.energy_kwh for c in cells])
        tat = np.array([c.tat_ms for c in cells])
        objective = 0.5 * (energy - energy.min()) / np.ptp(energy) + 0.5 * (tat - tat.min()) / np.ptp(tat)
        best = min(objective)
        candidates = [c.reduction for c, value in zip(cells, objective) if value <= best + 1e-12]
        assert r.best_reduction == max(candidates)
        assert r.objective_value == pytest.approx(best)


def test_fifteen_percent_is_the_modal_sweet_spot(sweep_grid):
    results = sweet_spot(sweep_grid)
    assert modal_reduction(results) == 0.15
    assert sum(r.best_reduction == 0.15 for r in results) > len(results) // 2


def test_scaling_weights_keeps_the_argmin(sweep_grid):
    a = sweet_spot(sweep_grid, ObjectiveWeights(0.3, 0.7))
    b = sweet_spot(sweep_grid, ObjectiveWeights(3.0, 7.0))
    assert [r.best_reduction for r in a] == [r.best_reduction for r in b]


def test_tat_cap_excludes_levels(sweep_grid):
    results = sweet_spot(sweep_grid, ObjectiveWeights(1.0, 0.0), max_tat_increase_pct=5.0)
    assert all(r.tat_increase_pct <= 5.0 for r in results)
    assert all(r.best_reduction < 0.20 for r in results)


def test_tradeoff_bands(sweep_grid):
    report = tradeoff_report(sweep_grid)
    assert list(report["reduction_pct"]) == [0.0, 5.0, 10.0, 15.0, 20.0]

    base = _level(report, 0.0)
    assert base.tat_increase_pct == 0.0 and base.energy_saving_pct == 0.0

    five = _level(report, 5.0)
    assert 3.05 - 1 <= five.tat_increase_pct <= 3.90 + 1
    assert 4.14 - 1 <= five.energy_saving_pct <= 4.81 + 1

    fifteen = _level(report, 15.0)
    assert 4.5 <= fifteen.tat_increase_pct <= 7.0
    assert 8.0 <= fifteen.energy_saving_pct <= 11.0

    twenty = _level(report, 20.0)
    assert twenty.tat_increase_pct > fifteen.tat_increase_pct
    assert twenty.energy_saving_pct > fifteen.energy_saving_pct
    assert 9.5 <= twenty.tat_increase_pct <= 11.5

    by_scheduler = tradeoff_report(sweep_grid, by_scheduler=True)
    sas_twenty = by_scheduler[(by_scheduler["scheduler"] == "SAS") & (by_scheduler["reduction_pct"] == 20.0)].iloc[0]
    assert 11.5 <= sas_twenty.energy_saving_pct <= 14.0


def test_level_gains_reproduce_their_fitted_targets(sweep_grid):
    """The 20% gains are fitted to these aggregates, so the sweep must give them back."""
    report = tradeoff_report(sweep_grid)
    by_scheduler = tradeoff_report(sweep_grid, by_scheduler=True)
    twenty = DEFAULT_LEVEL_TARGETS[0.20]
    assert _level(report, 20.0).tat_increase_pct == pytest.approx(twenty["tat_pct"], abs=0.05)
    sas = by_scheduler[(by_scheduler["scheduler"] == "SAS") & (by_scheduler["reduction_pct"] == 20.0)].iloc[0]
    assert sas.energy_saving_pct == pytest.approx(twenty["energy_pct"], abs=0.05)


def test_tradeoff_by_scheduler(sweep_grid):
    report = tradeoff_report(sweep_grid, by_scheduler=True)
    assert len(report) == 30
    assert list(report.columns) == ["scheduler", "reduction_pct", "tat_increase_pct", "energy_saving_pct"]
    assert report["scheduler"].iloc[0] == "FCFS"


def test_best_by_workflow(sweep_grid):
    results = best_by_workflow(sweep_grid)
    assert [r.workflow for r in results] == ["WF-1", "WF-2", "WF-3", "WF-4", "WF-5"]
    assert all(r.best_reduction in REDUCTION_LEVELS for r in results)


def test_incomplete_grid(sweep_grid):
    partial = [c for c in sweep_grid if not (c.scheduler is SchedulerKind.SAS and c.reduction == 0.10)]
    with pytest.raises(CoverageError):
        sweet_spot(partial)


def test_weights_validation():
    with pytest.raises(InvalidParameterError):
        ObjectiveWeights(0.0, 0.0)
    with pytest.raises(InvalidParameterError):
        ObjectiveWeights(-1.0, 1.0)


def test_synthetic_sweep_averages_accepted_records(calibration):
    kind, wf = SchedulerKind.LAS, "WF-1"
    records = [
        SyntheticRecord(kind, wf, level, 500.0 + i, 1500.0, 18.0 - i, accepted=True)
        for level in (0.05, 0.10, 0.15, 0.20) for i in (0.0, 2.0)
    ]
    records.append(SyntheticRecord(kind, wf, 0.10, 9999.0, 1500.0, 1.0, accepted=False))
    grid = sweep(
        source="synthetic", records=records, baseline=list(calibration.base_traces.values()),
        schedulers=[kind], workflows=[wf],
    )
    assert [c.reduction for c in grid] == list(REDUCTION_LEVELS)
    assert grid[2].tat_ms == 501.0
    assert grid[2].energy_kwh == 17.0
    assert grid[0] == SweepCell.from_trace(calibration.base_traces[(kind, wf)])


def test_synthetic_sweep_reports_gaps(calibration):
    with pytest.raises(CoverageError) as excinfo:
        sweep(source="synthetic", records=[], baseline=list(calibration.base_traces.values()))
    assert len(excinfo.value.missing) == 120


def test_sweep_and_sweet_spot_files(tmp_path, sweep_grid):
    path = tmp_path / "sweep.csv"
    write_sweep(path, sweep_grid)
    assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(SWEEP_COLUMNS)
    reloaded = read_sweep(path)
    assert [c.reduction for c in reloaded] == [c.reduction for c in sweep_grid]
    assert [r.best_reduction for r in sweet_spot(reloaded)] == [r.best_reduction for r in sweet_spot(sweep_grid)]

    weights = ObjectiveWeights()
    results = sweet_spot(reloaded, weights)
    out = tmp_path / "sweet_spot.json"
    write_sweet_spots(out, results, weights, best_by_workflow(reloaded, weights))
    with open(out, encoding="utf-8") as f:
        data = json.load(f)
    assert data["modal_best_reduction_pct"] == 15.0
    assert len(data["pairs"]) == 30
    assert data["pairs"][0]["scheduler"] == "FCFS"
    assert len(data["best_by_workflow"]) == 5

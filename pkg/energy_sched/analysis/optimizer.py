"""Frequency-reduction sweep and weighted energy/turnaround selection."""

import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from energy_sched.errors import CoverageError, InvalidParameterError, MissingArtifactError, SchemaError
from energy_sched.scheduler.simulator import apply_frequency_reduction, default_frequency, simulate
from energy_sched.scheduler.workflows import WORKFLOW_IDS, get_workflow
from energy_sched.utils import REDUCTION_LEVELS, SCHEDULERS, SchedulerKind, derive_seed, reduction_pct

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["scheduler", "workflow", "reduction_pct", "tat_ms", "energy_kwh"]
NORMALIZATION = "per-pair min-max"

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class SweepCell:
    scheduler: SchedulerKind
    workflow: str
    reduction: float
    tat_ms: float
    energy_kwh: float

    @property
    def pair(self):
        return (self.scheduler, self.workflow)

    @classmethod
    def from_trace(cls, trace):
        return cls(trace.scheduler, trace.workflow, trace.reduction, trace.tat_ms, trace.energy_kwh)


@dataclass(frozen=True)
class ObjectiveWeights:
    alpha_energy: float = 0.5
    beta_time: float = 0.5

    def __post_init__(self):
        if self.alpha_energy < 0 or self.beta_time < 0:
            raise InvalidParameterError("objective weights must be >= 0")
        if self.alpha_energy == 0 and self.beta_time == 0:
            raise InvalidParameterError("objective weights cannot both be 0")


@dataclass(frozen=True)
class SweetSpotResult:
    scheduler: SchedulerKind
    workflow: str
    best_reduction: float
    objective_value: float
    tat_increase_pct: float
    energy_saving_pct: float

    def to_dict(self):
        data = asdict(self)
        data["scheduler"] = self.scheduler.label
        data["best_reduction_pct"] = reduction_pct(self.best_reduction)
        return data


def _order(kind):
    return SCHEDULERS.index(kind)


# ─── Sweep ────────────────────────────────────────────────────────────────────


def simulate_grid(calibration, workflows=WORKFLOW_IDS, schedulers=SCHEDULERS,
                  reductions=REDUCTION_LEVELS, progress=False):
    """Re-run each calibrated pair at base frequency and apply every reduction level."""
    traces = []
    pairs = [(SchedulerKind.parse(k), wf) for k in schedulers for wf in workflows]
    for kind, wf_id in tqdm(pairs, desc="sweep", unit="pair", disable=not progress):
        params = calibration.params_for(kind, wf_id)
        tasks = calibration.base_traces[(kind, wf_id)].tasks
        base = simulate(
            get_workflow(wf_id).with_tasks(tasks),
            kind,
            default_frequency(kind),
            params,
            derive_seed(calibration.seed, "sim", kind.value, wf_id),
            calibration.hardware,
            calibration.energy_scale,
            calibration.jitter_sigma,
        )
        for level in reductions:
            traces.append(apply_frequency_reduction(base, level, params))
    return traces


def _aggregate_records(records, baseline):
    groups = defaultdict(list)
    for record in records:
        if record.accepted:
            groups[(record.scheduler, record.workflow, record.reduction)].append(record)
    cells = {}
    for key, rows in groups.items():
        cells[key] = SweepCell(
            key[0], key[1], key[2],
            float(np.mean([r.tat_ms for r in rows])),
            float(np.mean([r.energy_kwh for r in rows])),
        )
    for trace in baseline:
        cells.setdefault((trace.scheduler, trace.workflow, 0.0), SweepCell.from_trace(trace))
    return cells


def sweep(calibration=None, workflows=WORKFLOW_IDS, schedulers=SCHEDULERS, reductions=REDUCTION_LEVELS,
          source="simulated", records=None, baseline=(), progress=False):
    """One SweepCell per (scheduler, workflow, reduction).

    The synthetic source averages accepted records per triple; base-frequency
    cells come from `baseline` traces when the records carry none.
    """
    if source == "simulated":
        if calibration is None:
            raise MissingArtifactError("calibration.json", "run `calibrate` first")
        traces = simulate_grid(calibration, workflows, schedulers, reductions, progress)
        return [SweepCell.from_trace(t) for t in traces]
    if source != "synthetic":
        raise InvalidParameterError(f"unknown sweep source {source!r}")

    cells = _aggregate_records(records or [], baseline)
    grid, missing = [], []
    for kind in (SchedulerKind.parse(k) for k in schedulers):
        for wf in workflows:
            for level in reductions:
                cell = cells.get((kind, wf, level))
                if cell is None:
                    missing.append(f"{kind.label}/{wf}@{reduction_pct(level):g}%")
                else:
                    grid.append(cell)
    if missing:
        raise CoverageError("synthetic records do not cover the sweep grid", missing)
    return grid


# ─── Selection ────────────────────────────────────────────────────────────────


def _pairs(grid, reductions):
    by_pair = defaultdict(dict)
    for cell in grid:
        by_pair[cell.pair][cell.reduction] = cell
    missing = [
        f"{kind.label}/{wf}@{reduction_pct(level):g}%"
        for (kind, wf), cells in by_pair.items() for level in reductions if level not in cells
    ]
    if missing:
        raise CoverageError("sweep grid is incomplete", missing)
    return by_pair


def _normalize(values):
    values = np.asarray(values, dtype=np.float64)
    span = values.max() - values.min()
    if span == 0:
        return np.zeros_like(values)
    return (values - values.min()) / span


def _percentages(cell, base):
    tat = (cell.tat_ms / base.tat_ms - 1.0) * 100.0 if base.tat_ms else 0.0
    energy = (1.0 - cell.energy_kwh / base.energy_kwh) * 100.0 if base.energy_kwh else 0.0
    return tat, energy


def _argmin(cells, objective):
    best = min(objective)
    tied = [i for i, value in enumerate(objective) if value <= best + _TIE_TOL]
    # ties go to the larger reduction
    return max(tied, key=lambda i: (cells[i].reduction, -_order(cells[i].scheduler)))


def sweet_spot(grid, weights=None, max_tat_increase_pct=None, reductions=REDUCTION_LEVELS):
    weights = weights or ObjectiveWeights()
    results = []
    for (kind, wf), by_level in sorted(_pairs(grid, reductions).items(), key=lambda kv: (_order(kv[0][0]), kv[0][1])):
        cells = [by_level[level] for level in sorted(by_level)]
        base = by_level[0.0] if 0.0 in by_level else cells[0]
        objective = (
            weights.alpha_energy * _normalize([c.energy_kwh for c in cells])
            + weights.beta_time * _normalize([c.tat_ms for c in cells])
        )
        if max_tat_increase_pct is not None:
            allowed = [_percentages(c, base)[0] <= max_tat_increase_pct + _TIE_TOL for c in cells]
            objective = np.where(allowed, objective, np.inf)
        i = _argmin(cells, list(objective))
        tat, energy = _percentages(cells[i], base)
        results.append(SweetSpotResult(kind, wf, cells[i].reduction, float(objective[i]), tat, energy))
    return results


def best_by_workflow(grid, weights=None, reductions=REDUCTION_LEVELS):
    """Best (scheduler, reduction) per workflow, normalizing over the workflow's cells."""
    weights = weights or ObjectiveWeights()
    by_pair = _pairs(grid, reductions)
    results = []
    for wf in sorted({wf for _, wf in by_pair}):
        cells = sorted(
            (c for (kind, w), levels in by_pair.items() if w == wf for c in levels.values()),
            key=lambda c: (_order(c.scheduler), c.reduction),
        )
        objective = (
            weights.alpha_energy * _normalize([c.energy_kwh for c in cells])
            + weights.beta_time * _normalize([c.tat_ms for c in cells])
        )
        i = _argmin(cells, list(objective))
        best = cells[i]
        tat, energy = _percentages(best, by_pair[best.pair][0.0])
        results.append(SweetSpotResult(best.scheduler, wf, best.reduction, float(objective[i]), tat, energy))
    return results


def tradeoff_report(grid, by_scheduler=False, reductions=REDUCTION_LEVELS):
    """Mean TAT increase and energy saving (percent) per reduction level."""
    by_pair = _pairs(grid, reductions)
    rows = []
    for (kind, wf), levels in by_pair.items():
        base = levels[0.0]
        for level in reductions:
            tat, energy = _percentages(levels[level], base)
            rows.append({"scheduler": kind.label, "order": _order(kind), "reduction_pct": reduction_pct(level),
                         "tat_increase_pct": tat, "energy_saving_pct": energy})
    frame = pd.DataFrame(rows)
    keys = ["order", "scheduler", "reduction_pct"] if by_scheduler else ["reduction_pct"]
    report = frame.groupby(keys, sort=True)[["tat_increase_pct", "energy_saving_pct"]].mean().reset_index()
    return report.drop(columns=["order"], errors="ignore")


def modal_reduction(results):
    counts = defaultdict(int)
    for r in results:
        counts[r.best_reduction] += 1
    return max(counts, key=lambda level: (counts[level], level)) if counts else None


# ─── Files ────────────────────────────────────────────────────────────────────


def write_sweep(path, cells):
    frame = pd.DataFrame(
        [{"scheduler": c.scheduler.label, "workflow": c.workflow, "reduction_pct": reduction_pct(c.reduction),
          "tat_ms": c.tat_ms, "energy_kwh": c.energy_kwh} for c in cells],
        columns=SWEEP_COLUMNS,
    )
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def read_sweep(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, "run `sweep` first")
    frame = pd.read_csv(path)
    if list(frame.columns) != SWEEP_COLUMNS:
        raise SchemaError(f"{path}: expected columns {','.join(SWEEP_COLUMNS)}")
    return [
        SweepCell(SchedulerKind.parse(row.scheduler), str(row.workflow), round(row.reduction_pct / 100.0, 6),
                  float(row.tat_ms), float(row.energy_kwh))
        for row in frame.itertuples(index=False)
    ]


def write_sweet_spots(path, results, weights, by_workflow=(), max_tat_increase_pct=None):
    modal = modal_reduction(results)
    payload = {
        "weights": asdict(weights),
        "normalization": NORMALIZATION,
        "tie_break": "larger reduction",
        "max_tat_increase_pct": max_tat_increase_pct,
        "modal_best_reduction_pct": reduction_pct(modal) if modal is not None else None,
        "pairs": [r.to_dict() for r in results],
        "best_by_workflow": [r.to_dict() for r in by_workflow],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def write_tradeoff(path, frame):
    frame.to_csv(path, index=False, float_format="%.4f", lineterminator="\n")

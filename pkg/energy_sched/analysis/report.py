"""Before/after thermal comparison at the sweet spots and the markdown run report."""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from energy_sched.physics.energy_model import average_power_w
from energy_sched.physics.thermal import steady_state_lumped, thermal_profile, write_temperature_csv
from energy_sched.utils import reduction_pct

logger = logging.getLogger(__name__)

KELVIN_OFFSET = 273.15
THERMAL_SUMMARY_COLUMNS = [
    "scheduler", "workflow", "best_reduction_pct", "power_before_w", "power_after_w",
    "temp_before_k", "temp_after_k", "temp_drop_pct",
]


@dataclass(frozen=True)
class ThermalComparison:
    scheduler: str
    workflow: str
    best_reduction_pct: float
    power_before_w: float
    power_after_w: float
    temp_before_k: float
    temp_after_k: float
    temp_drop_pct: float


def constant_power_trace(power_w, horizon_s=80.0, step_s=1.0):
    times = np.arange(0.0, horizon_s + step_s / 2, step_s)
    return [(float(t), power_w) for t in times]


def celsius_drop_pct(before_k, after_k):
    """Relative drop of a temperature read in degrees Celsius."""
    before_c = before_k - KELVIN_OFFSET
    if before_c == 0:
        return 0.0
    return (before_c - (after_k - KELVIN_OFFSET)) / before_c * 100.0


def thermal_comparison(results, grid, node, energy_scale, out_dir=None, horizon_s=80.0, step_s=1.0):
    """Steady-state lumped temperatures at base frequency and at each pair's sweet spot.

    When `out_dir` is given the transient from ambient is written to
    `{scheduler}_{workflow}_{before|after}.csv` in it.
    """
    cells = {(c.scheduler, c.workflow, c.reduction): c for c in grid}
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    rows = []
    for result in results:
        base = cells[(result.scheduler, result.workflow, 0.0)]
        best = cells[(result.scheduler, result.workflow, result.best_reduction)]
        p_before = average_power_w(base.energy_kwh, base.tat_ms, energy_scale)
        p_after = average_power_w(best.energy_kwh, best.tat_ms, energy_scale)
        t_before = steady_state_lumped(node, p_before)
        t_after = steady_state_lumped(node, p_after)
        rows.append(ThermalComparison(
            scheduler=result.scheduler.label,
            workflow=result.workflow,
            best_reduction_pct=reduction_pct(result.best_reduction),
            power_before_w=p_before,
            power_after_w=p_after,
            temp_before_k=t_before,
            temp_after_k=t_after,
            temp_drop_pct=celsius_drop_pct(t_before, t_after),
        ))
        if out_dir is not None:
            for tag, power in (("before", p_before), ("after", p_after)):
                profile = thermal_profile(constant_power_trace(power, horizon_s, step_s), node)
                write_temperature_csv(Path(out_dir) / f"{result.scheduler.label}_{result.workflow}_{tag}.csv", profile)
    if rows:
        logger.info("mean steady-state temperature drop at the sweet spot: %.2f%%",
                    float(np.mean([r.temp_drop_pct for r in rows])))
    return rows


def write_thermal_summary(path, rows):
    frame = pd.DataFrame([asdict(r) for r in rows], columns=THERMAL_SUMMARY_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.4f", lineterminator="\n")


def _table(frame, columns, digits=2):
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for row in frame.itertuples(index=False):
        cells = []
        for value in row:
            cells.append(f"{value:.{digits}f}" if isinstance(value, float) else str(value))
        lines.append("| " + " | ".join(cells) + " |")
    return lines


def render_report(calibration=None, tradeoff=None, sweet_spots=(), by_workflow=(), bootstrap=None,
                  thermal=(), validation=None, weights=None):
    """Markdown summary of one run. No timestamps, so identical runs give identical files."""
    lines = ["# Energy-Aware Scheduling Run Report", ""]

    if calibration:
        lines += ["## Calibration", ""]
        lines.append(f"- Seed: {calibration.get('seed')}")
        lines.append(f"- Max base residual: {calibration.get('max_base_error', 0.0):.4%}")
        lines.append(f"- Max reduced residual: {calibration.get('max_reduced_error', 0.0):.4%}")
        lines.append(f"- Passed: {'yes' if calibration.get('passed') else 'no'}")
        for soft in calibration.get("soft_targets", []):
            lines.append(
                f"- {soft['scheduler']}/{soft['workflow']} at {soft['reduction_pct']:g}%: "
                f"{soft['metric']} {soft['predicted']:.2f} (reference {soft['expected']:g})"
            )
        lines.append("")

    if tradeoff is not None and len(tradeoff):
        lines += ["## Trade-off by reduction level", ""]
        lines += _table(tradeoff, list(tradeoff.columns))
        lines.append("")

    if sweet_spots:
        lines += ["## Sweet spots", ""]
        if weights is not None:
            lines.append(f"Weights: energy {weights.alpha_energy:g}, time {weights.beta_time:g} (per-pair min-max normalization)")
            lines.append("")
        frame = pd.DataFrame(
            [(r.scheduler.label, r.workflow, reduction_pct(r.best_reduction), r.tat_increase_pct, r.energy_saving_pct)
             for r in sweet_spots],
            columns=["scheduler", "workflow", "best_reduction_pct", "tat_increase_pct", "energy_saving_pct"],
        )
        lines += _table(frame, list(frame.columns))
        lines.append("")
        counts = frame["best_reduction_pct"].value_counts()
        lines.append("Best reduction counts: " + ", ".join(
            f"{level:g}%: {counts[level]}" for level in sorted(counts.index)
        ))
        lines.append("")

    if by_workflow:
        lines += ["## Best scheduler per workflow", ""]
        for r in by_workflow:
            lines.append(
                f"- {r.workflow}: {r.scheduler.label} at {reduction_pct(r.best_reduction):g}% "
                f"(TAT +{r.tat_increase_pct:.2f}%, energy -{r.energy_saving_pct:.2f}%)"
            )
        lines.append("")

    if bootstrap:
        lines += ["## Bootstrap", ""]
        low, high = bootstrap["ci"]
        lines.append(f"- Metric: {bootstrap['metric']} ({'paired' if bootstrap.get('paired') else 'unpaired'})")
        lines.append(f"- Observed difference: {bootstrap['observed_diff_raw']:.4f}")
        lines.append(f"- {bootstrap['confidence_level']:.0%} CI: [{low:.4f}, {high:.4f}]")
        lines.append(f"- p-value: {bootstrap['p_value']:.4g} (B = {bootstrap['b_samples']})")
        lines.append("")

    if validation:
        lines += ["## Synthetic record validation", ""]
        for key in ("records", "thermal_ok", "consistent", "outliers", "acceptable"):
            lines.append(f"- {key.replace('_', ' ').title()}: {validation[key]}")
        lines.append("")

    if thermal:
        drops = [r.temp_drop_pct for r in thermal]
        lines += ["## Thermal", ""]
        lines.append(f"- Mean steady-state temperature drop at the sweet spot: {np.mean(drops):.2f}%")
        lines.append(f"- Range: {min(drops):.2f}% to {max(drops):.2f}%")
        lines.append("")

    return "\n".join(lines)


def write_report(path, text):
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
        if not text.endswith("\n"):
            f.write("\n")

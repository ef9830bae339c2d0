"""Fit per-(scheduler, workflow) policy parameters to the published tables.

Base-frequency fit: TAT scales as 1/base_cpu_boost and average power is
boost-invariant, so one raw simulation per pair fixes both the boost and the
power multiplier in closed form. Reduced-frequency fit: least-squares
sensitivities through the origin over the reduced rows, then shared per-level
gains for the grid levels the tables do not cover.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import pandas as pd
from tqdm import tqdm

from energy_sched.errors import CalibrationError, CoverageError, InvalidInputError, MissingArtifactError
from energy_sched.physics.energy_model import average_power_w, run_energy_kwh
from energy_sched.physics.hardware import HardwareProfile
from energy_sched.scheduler import POLICY_DICT
from energy_sched.scheduler.simulator import (
    DEFAULT_ENERGY_SCALE,
    DEFAULT_JITTER_SIGMA,
    apply_frequency_reduction,
    default_frequency,
    simulate,
)
from energy_sched.scheduler.base_policy import SchedulerPolicyParams
from energy_sched.scheduler.traces import ExecutionTrace
from energy_sched.scheduler.workflows import WORKFLOW_IDS, get_workflow
from energy_sched.utils import GATE_LEVELS, SCHEDULERS, SchedulerKind, derive_seed

logger = logging.getLogger(__name__)

CALIBRATION_FORMAT = "energy-sched-calibration"

# Aggregate trade-offs at the levels the tables leave out (percent). The gains
# at these levels are fitted to them, so the sweep reproduces them.
DEFAULT_LEVEL_TARGETS = {
    0.05: {"tat_pct": 3.475, "energy_pct": 4.475},
    0.20: {"tat_pct": 10.44, "energy_pct": 12.76, "energy_scope": "SAS"},
}

DEFAULT_SOFT_TARGETS = (
    {"scheduler": "SAS", "workflow": "WF-5", "reduction_pct": 20.0,
     "metric": "energy_saving_pct", "expected": 12.4},
)

RESIDUAL_COLUMNS = [
    "scheduler", "workflow", "reduction_pct", "metric", "target", "fitted", "rel_error", "tolerance",
]


@dataclass(frozen=True)
class ResidualRow:
    scheduler: str
    workflow: str
    reduction_pct: float
    metric: str
    target: float
    fitted: float
    rel_error: float
    tolerance: float

    @property
    def passed(self):
        return self.rel_error <= self.tolerance

    @property
    def severity(self):
        return self.rel_error / self.tolerance if self.tolerance > 0 else math.inf


@dataclass
class CalibrationResult:
    params: dict
    base_traces: dict
    residuals: list = field(default_factory=list)
    level_gains: dict = field(default_factory=dict)
    soft_targets: list = field(default_factory=list)
    seed: int = 0
    energy_scale: float = DEFAULT_ENERGY_SCALE
    jitter_sigma: float = DEFAULT_JITTER_SIGMA
    hardware: HardwareProfile = field(default_factory=HardwareProfile)

    def params_for(self, sched, workflow):
        key = (SchedulerKind.parse(sched), workflow)
        try:
            return self.params[key]
        except KeyError:
            raise CoverageError("calibration has no entry", [f"{key[0]}/{workflow}"]) from None

    def worst(self):
        if not self.residuals:
            return None
        return max(self.residuals, key=lambda r: r.severity)

    @property
    def passed(self):
        return all(r.passed for r in self.residuals)

    def residual_frame(self):
        return pd.DataFrame([asdict(r) for r in self.residuals], columns=RESIDUAL_COLUMNS)

    def write_residuals(self, path):
        self.residual_frame().to_csv(path, index=False, float_format="%.6f", lineterminator="\n")

    def to_dict(self):
        pairs = []
        for (kind, workflow), params in sorted(self.params.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
            pairs.append({
                "scheduler": kind.label,
                "workflow": workflow,
                "params": params.to_dict(),
                "base": self.base_traces[(kind, workflow)].to_dict(),
            })
        base_errors = [r.rel_error for r in self.residuals if r.reduction_pct == 0]
        reduced_errors = [r.rel_error for r in self.residuals if r.reduction_pct != 0]
        return {
            "format": CALIBRATION_FORMAT,
            "version": 1,
            "seed": self.seed,
            "energy_scale": self.energy_scale,
            "jitter_sigma": self.jitter_sigma,
            "hardware": asdict(self.hardware),
            "level_gains": {
                name: {f"{level:.2f}": gain for level, gain in sorted(gains.items())}
                for name, gains in sorted(self.level_gains.items())
            },
            "soft_targets": self.soft_targets,
            "residual_summary": {
                "rows": len(self.residuals),
                "max_base_error": max(base_errors, default=0.0),
                "max_reduced_error": max(reduced_errors, default=0.0),
                "passed": self.passed,
            },
            "pairs": pairs,
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info("saved calibration for %d pairs to %s", len(self.params), path)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(path, "run `calibrate` first")
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidInputError(f"{path}: not a calibration file ({e})") from None
        if data.get("format") != CALIBRATION_FORMAT:
            raise InvalidInputError(f"{path}: not a calibration file")

        params, base_traces = {}, {}
        for pair in data.get("pairs", []):
            kind = SchedulerKind.parse(pair["scheduler"])
            key = (kind, pair["workflow"])
            params[key] = SchedulerPolicyParams.from_dict(pair["params"])
            base = dict(pair["base"])
            base["scheduler"] = kind
            base_traces[key] = ExecutionTrace(**base)
        return cls(
            params=params,
            base_traces=base_traces,
            level_gains={
                name: {float(k): v for k, v in gains.items()}
                for name, gains in data.get("level_gains", {}).items()
            },
            soft_targets=data.get("soft_targets", []),
            seed=data.get("seed", 0),
            energy_scale=data.get("energy_scale", DEFAULT_ENERGY_SCALE),
            jitter_sigma=data.get("jitter_sigma", DEFAULT_JITTER_SIGMA),
            hardware=HardwareProfile(**data.get("hardware", {})),
        )


def _relative_error(target, fitted):
    if target == 0:
        return 0.0 if fitted == 0 else math.inf
    return abs(fitted - target) / abs(target)


def _index_targets(base_targets):
    indexed = {}
    for trace in base_targets:
        if trace.reduction != 0.0:
            continue
        if trace.key in indexed:
            raise InvalidInputError(f"duplicate base target for {trace.scheduler}/{trace.workflow}")
        indexed[trace.key] = trace
    missing = [
        f"{kind}/{wf}" for kind in SCHEDULERS for wf in WORKFLOW_IDS if (kind, wf) not in indexed
    ]
    if missing:
        raise CoverageError("base targets do not cover every scheduler/workflow pair", missing)
    return indexed


def _target_power(trace, energy_scale):
    if math.isnan(trace.tat_ms) or trace.tat_ms <= 0:
        raise InvalidInputError(f"{trace.scheduler}/{trace.workflow}: base TAT is required")
    if not math.isnan(trace.avg_power_w):
        return trace.avg_power_w
    if math.isnan(trace.energy_kwh):
        raise InvalidInputError(f"{trace.scheduler}/{trace.workflow}: need power or energy")
    return average_power_w(trace.energy_kwh, trace.tat_ms, energy_scale)


def fit_base(target, seed, hardware, energy_scale, jitter_sigma):
    """Boost and power multiplier reproducing one base-frequency row."""
    kind = target.scheduler
    wf = get_workflow(target.workflow).with_tasks(target.tasks)
    freq = default_frequency(kind)
    defaults = POLICY_DICT[kind].default_params()
    sim_seed = derive_seed(seed, "sim", kind.value, wf.id)
    raw = simulate(wf, kind, freq, defaults, sim_seed, hardware, energy_scale, jitter_sigma)
    if raw.tat_ms <= 0:
        return defaults, raw
    params = defaults.updated(
        base_cpu_boost=raw.tat_ms / target.tat_ms,
        power_multiplier=_target_power(target, energy_scale) / raw.avg_power_w,
    )
    fitted = simulate(wf, kind, freq, params, sim_seed, hardware, energy_scale, jitter_sigma)
    return params, fitted


def fit_sensitivities(base, reduced):
    """Least-squares k_t, k_e through the origin; None when no reduced rows."""
    rows = [r for r in reduced if r.reduction > 0]
    if not rows:
        return None
    denom = math.fsum(r.reduction**2 for r in rows)
    k_t = math.fsum(r.reduction * (r.tat_ms / base.tat_ms - 1.0) for r in rows) / denom
    k_e = math.fsum(r.reduction * (1.0 - r.energy_kwh / base.energy_kwh) for r in rows) / denom
    if k_t < 0 or k_e < 0:
        logger.warning(
            "%s/%s: negative sensitivity (k_t=%.3f, k_e=%.3f) clamped to 0",
            base.scheduler, base.workflow, k_t, k_e,
        )
    return max(k_t, 0.0), max(k_e, 0.0)


def fit_level_gains(sensitivities, level_targets, fitted_levels):
    """Shared per-level gains; levels with table rows keep gain 1.

    r * g(r) is kept strictly increasing so the reduction model stays monotone.
    """
    gains = {"tat": {}, "energy": {}}
    for name, index in (("tat", 0), ("energy", 1)):
        for level in GATE_LEVELS:
            gains[name][level] = 1.0
        for level, target in sorted(level_targets.items()):
            if level in fitted_levels:
                continue
            key = "tat_pct" if name == "tat" else "energy_pct"
            if key not in target:
                continue
            scope = target.get(f"{name}_scope")
            pool = [
                k[index] for (kind, _), k in sensitivities.items()
                if scope is None or kind is SchedulerKind.parse(scope)
            ]
            mean_k = math.fsum(pool) / len(pool) if pool else 0.0
            if mean_k <= 0:
                continue
            gains[name][level] = target[key] / 100.0 / (level * mean_k)

        levels = sorted(gains[name])
        for i, level in enumerate(levels):
            lower = levels[i - 1] * gains[name][levels[i - 1]] if i > 0 else 0.0
            product = level * gains[name][level]
            upper = math.inf
            if i + 1 < len(levels) and levels[i + 1] in fitted_levels:
                upper = levels[i + 1] * gains[name][levels[i + 1]]
            if not lower < product < upper:
                clipped = min(max(product, lower * (1 + 1e-3)), upper * (1 - 1e-3))
                logger.warning(
                    "%s gain at %.0f%% clamped from %.3f to %.3f to keep the model monotone",
                    name, level * 100, gains[name][level], clipped / level,
                )
                gains[name][level] = clipped / level
    return gains


def calibrate(
    base_targets,
    reduced_targets=(),
    seed=2024,
    hardware=None,
    base_tolerance=0.01,
    reduced_tolerance=0.02,
    energy_scale=DEFAULT_ENERGY_SCALE,
    jitter_sigma=DEFAULT_JITTER_SIGMA,
    level_targets=None,
    soft_targets=DEFAULT_SOFT_TARGETS,
    raise_on_failure=True,
    progress=False,
):
    hardware = hardware or HardwareProfile()
    level_targets = DEFAULT_LEVEL_TARGETS if level_targets is None else level_targets
    level_targets = {round(float(level), 6): target for level, target in level_targets.items()}
    targets = _index_targets(base_targets)

    params, fitted, residuals = {}, {}, []
    for key in tqdm(sorted(targets, key=lambda k: (k[0].value, k[1])), desc="Calibrate",
                    unit="pair", disable=not progress):
        target = targets[key]
        params[key], fitted[key] = fit_base(target, seed, hardware, energy_scale, jitter_sigma)
        target_energy = target.energy_kwh
        if math.isnan(target_energy):
            target_energy = run_energy_kwh(target.avg_power_w, target.tat_ms, energy_scale)
        for metric, target_value, fitted_value in (
            ("tat_ms", target.tat_ms, fitted[key].tat_ms),
            ("energy_kwh", target_energy, fitted[key].energy_kwh),
        ):
            residuals.append(ResidualRow(
                key[0].label, key[1], 0.0, metric, target_value, fitted_value,
                _relative_error(target_value, fitted_value), base_tolerance,
            ))

    reduced_by_key = {}
    for trace in reduced_targets:
        if trace.reduction > 0:
            reduced_by_key.setdefault(trace.key, []).append(trace)
    fitted_levels = {t.reduction for rows in reduced_by_key.values() for t in rows}

    sensitivities = {}
    for key, rows in reduced_by_key.items():
        if key in fitted:
            k = fit_sensitivities(fitted[key], rows)
            if k is not None:
                sensitivities[key] = k
    for key in fitted:
        if key in sensitivities:
            continue
        # schedulers without reduced rows borrow the workflow's mean response
        peers = [k for (kind, wf), k in sensitivities.items() if wf == key[1]]
        peers = peers or list(sensitivities.values())
        if peers:
            sensitivities[key] = (
                math.fsum(p[0] for p in peers) / len(peers),
                math.fsum(p[1] for p in peers) / len(peers),
            )
        else:
            logger.warning("%s/%s: no reduced targets anywhere, sensitivities set to 0", *key)
            sensitivities[key] = (0.0, 0.0)

    gains = fit_level_gains(sensitivities, level_targets, fitted_levels)
    for key, (k_t, k_e) in sensitivities.items():
        params[key] = params[key].updated(
            tat_sensitivity=k_t,
            energy_sensitivity=k_e,
            tat_level_gain=gains["tat"],
            energy_level_gain=gains["energy"],
        )

    for key, rows in sorted(reduced_by_key.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        if key not in fitted:
            continue
        for row in sorted(rows, key=lambda r: r.reduction):
            predicted = apply_frequency_reduction(fitted[key], row.reduction, params[key])
            for metric, target_value, fitted_value in (
                ("tat_ms", row.tat_ms, predicted.tat_ms),
                ("energy_kwh", row.energy_kwh, predicted.energy_kwh),
            ):
                residuals.append(ResidualRow(
                    key[0].label, key[1], round(row.reduction * 100, 6), metric, target_value,
                    fitted_value, _relative_error(target_value, fitted_value), reduced_tolerance,
                ))

    result = CalibrationResult(
        params=params,
        base_traces=fitted,
        residuals=residuals,
        level_gains=gains,
        soft_targets=_evaluate_soft_targets(soft_targets, fitted, params),
        seed=seed,
        energy_scale=energy_scale,
        jitter_sigma=jitter_sigma,
        hardware=hardware,
    )
    worst = result.worst()
    if worst is not None:
        logger.info(
            "calibration: %d residual rows, worst %s/%s %s %.3f%%",
            len(residuals), worst.scheduler, worst.workflow, worst.metric, worst.rel_error * 100,
        )
    if raise_on_failure and not result.passed:
        raise CalibrationError(worst, result)
    return result


def _evaluate_soft_targets(soft_targets, fitted, params):
    report = []
    for target in soft_targets:
        key = (SchedulerKind.parse(target["scheduler"]), target["workflow"])
        if key not in fitted:
            continue
        level = target["reduction_pct"] / 100.0
        predicted = apply_frequency_reduction(fitted[key], level, params[key])
        base = fitted[key]
        if target["metric"] == "energy_saving_pct":
            value = (1.0 - predicted.energy_kwh / base.energy_kwh) * 100.0
        else:
            value = (predicted.tat_ms / base.tat_ms - 1.0) * 100.0
        report.append({**target, "predicted": round(value, 4)})
    return report

"""Discrete-event workflow simulation and the frequency-reduction model."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from energy_sched.errors import InvalidParameterError, UnsupportedPolicyError
from energy_sched.physics.energy_model import report_kwh, segment_joules
from energy_sched.physics.hardware import PHASE_ACTIVITY, HardwareProfile
from energy_sched.scheduler import POLICY_DICT
from energy_sched.scheduler.base_policy import TaskDraw
from energy_sched.scheduler.traces import ExecutionTrace, FrequencyConfig
from energy_sched.utils import REDUCTION_LEVELS, REFERENCE_UTILIZATION, SchedulerKind, check_reduction

logger = logging.getLogger(__name__)

DEFAULT_JITTER_SIGMA = 0.15
DEFAULT_ENERGY_SCALE = 1e5


@dataclass
class TaskTiming:
    """Per-run constants a policy needs to lay out one task."""

    cpu_slowdown: float
    phase_watts: dict

    def power(self, phase, freq_scale=1.0):
        return self.phase_watts[(phase, freq_scale)]


def policy_for(sched, params=None):
    kind = SchedulerKind.parse(sched)
    try:
        policy_cls = POLICY_DICT[kind]
    except KeyError:
        raise UnsupportedPolicyError(f"no policy registered for {kind}") from None
    return policy_cls(params if params is not None else policy_cls.default_params())


def default_frequency(sched, reduction=0.0):
    policy_cls = POLICY_DICT[SchedulerKind.parse(sched)]
    return FrequencyConfig(reduction=reduction, utilization=policy_cls.utilization)


def draw_tasks(wf, params, seed, boost=1.0, jitter_sigma=DEFAULT_JITTER_SIGMA):
    """Seeded task durations; duplicate jitter comes from its own substream."""
    n = wf.task_count
    main_seq, dup_seq = np.random.SeedSequence(seed).spawn(2)
    main_rng = np.random.default_rng(main_seq)
    dup_rng = np.random.default_rng(dup_seq)
    mu = -0.5 * jitter_sigma**2
    durations = wf.base_task_ms * main_rng.lognormal(mu, jitter_sigma, n) / boost
    locality = main_rng.random(n)
    dup_durations = wf.base_task_ms * dup_rng.lognormal(mu, jitter_sigma, n) / boost

    n_dup = int(round(params.speculative_dup_rate * n))
    stragglers = set()
    if n_dup:
        order = np.argsort(-durations, kind="stable")
        stragglers = set(int(i) for i in order[:n_dup])

    return [
        TaskDraw(
            index=i,
            duration_ms=float(durations[i]),
            locality_u=float(locality[i]),
            duplicate_ms=float(dup_durations[i]) if i in stragglers else None,
        )
        for i in range(n)
    ]


def phase_watts(hardware, effective_freq, freq_scales):
    watts = {}
    for scale in freq_scales:
        for phase in PHASE_ACTIVITY:
            breakdown, _ = hardware.phase_power(phase, effective_freq * scale)
            watts[(phase, scale)] = breakdown.total()
    return watts


def simulate(
    wf,
    sched,
    freq,
    params,
    seed,
    hardware=None,
    energy_scale=DEFAULT_ENERGY_SCALE,
    jitter_sigma=DEFAULT_JITTER_SIGMA,
):
    """Run `wf` under `sched` and return its execution trace.

    Tasks run back to back; TAT is the sum of per-task critical paths and
    energy the sum of every charged segment, scaled by the calibrated power
    multiplier and reported in table units.
    """
    hardware = hardware or HardwareProfile()
    policy = policy_for(sched, params)
    kind = policy.kind
    effective_freq = freq.effective_freq

    if wf.task_count == 0:
        return ExecutionTrace(
            scheduler=kind,
            workflow=wf.id,
            tasks=0,
            tat_ms=0.0,
            avg_power_w=0.0,
            energy_kwh=0.0,
            effective_freq_ghz=effective_freq / 1e9,
            utilization=freq.utilization,
            reduction=freq.reduction,
        )

    reference_freq = freq.base_freq * REFERENCE_UTILIZATION
    timing = TaskTiming(
        cpu_slowdown=reference_freq / effective_freq,
        phase_watts=phase_watts(hardware, effective_freq, policy.freq_scales),
    )
    draws = draw_tasks(wf, params, seed, boost=params.base_cpu_boost, jitter_sigma=jitter_sigma)

    path = []
    joules = []
    scale_time = []
    for draw in draws:
        plan = policy.plan_task(draw, wf, timing)
        path.append(plan.path_ms)
        for seg in plan.segments:
            joules.append(segment_joules(timing.power(seg.phase, seg.freq_scale), seg.duration_ms / 1000.0))
            scale_time.append((seg.freq_scale, seg.duration_ms))

    tat_ms = math.fsum(path)
    total_j = math.fsum(joules) * params.power_multiplier
    busy_ms = math.fsum(d for _, d in scale_time)
    mean_scale = math.fsum(s * d for s, d in scale_time) / busy_ms if busy_ms > 0 else 1.0

    trace = ExecutionTrace(
        scheduler=kind,
        workflow=wf.id,
        tasks=wf.task_count,
        tat_ms=tat_ms,
        avg_power_w=total_j / (tat_ms / 1000.0),
        energy_kwh=report_kwh(total_j, energy_scale),
        effective_freq_ghz=effective_freq * mean_scale / 1e9,
        utilization=freq.utilization,
        reduction=freq.reduction,
    )
    logger.debug(
        "simulated %s/%s: %.2f ms, %.2f W, %.2f kWh",
        kind.label, wf.id, trace.tat_ms, trace.avg_power_w, trace.energy_kwh,
    )
    return trace


# ─── Frequency-Reduction Model ────────────────────────────────────────────────


def reduction_factors(reduction, params):
    """(TAT multiplier, energy multiplier) for a grid level."""
    level = check_reduction(reduction, REDUCTION_LEVELS)
    if level == 0.0:
        return 1.0, 1.0
    tat_factor = 1.0 + params.tat_sensitivity * level * params.tat_gain(level)
    energy_factor = 1.0 - params.energy_sensitivity * level * params.energy_gain(level)
    if energy_factor <= 0:
        raise InvalidParameterError(
            f"energy sensitivity {params.energy_sensitivity} drives energy to zero at {level:.0%}"
        )
    return tat_factor, energy_factor


def apply_frequency_reduction(base, reduction, params):
    if base.reduction != 0.0:
        raise InvalidParameterError(
            f"expected a base-frequency trace, got one at {base.reduction:.0%}"
        )
    level = check_reduction(reduction, REDUCTION_LEVELS)
    if level == 0.0:
        return base
    tat_factor, energy_factor = reduction_factors(level, params)
    return base.with_metrics(
        tat_ms=base.tat_ms * tat_factor,
        energy_kwh=base.energy_kwh * energy_factor,
        avg_power_w=base.avg_power_w * energy_factor / tat_factor,
        effective_freq_ghz=base.effective_freq_ghz * (1.0 - level),
        reduction=level,
    )


def revert_frequency_reduction(trace, params):
    level = trace.reduction
    if level == 0.0:
        return trace
    tat_factor, energy_factor = reduction_factors(level, params)
    return trace.with_metrics(
        tat_ms=trace.tat_ms / tat_factor,
        energy_kwh=trace.energy_kwh / energy_factor,
        avg_power_w=trace.avg_power_w * tat_factor / energy_factor,
        effective_freq_ghz=trace.effective_freq_ghz / (1.0 - level),
        reduction=0.0,
    )

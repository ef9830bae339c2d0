import pytest

from energy_sched.errors import InvalidParameterError, ReductionRangeError, UnsupportedPolicyError
from energy_sched.scheduler import POLICY_DICT
from energy_sched.scheduler.base_policy import SchedulerPolicyParams
from energy_sched.scheduler.simulator import (
    apply_frequency_reduction,
    default_frequency,
    policy_for,
    revert_frequency_reduction,
    simulate,
)
from energy_sched.scheduler.traces import FrequencyConfig
from energy_sched.scheduler.workflows import WORKFLOW_IDS, get_workflow
from energy_sched.utils import GATE_LEVELS, SCHEDULERS, SchedulerKind


def _run(kind, wf_id="WF-1", params=None, seed=11):
    params = params or POLICY_DICT[kind].default_params()
    return simulate(get_workflow(wf_id), kind, default_frequency(kind), params, seed)


@pytest.mark.parametrize("kind", SCHEDULERS)
def test_simulate_is_deterministic(kind):
    assert _run(kind) == _run(kind)


def test_different_seeds_give_different_runs():
    assert _run(SchedulerKind.LAS, seed=1).tat_ms != _run(SchedulerKind.LAS, seed=2).tat_ms


@pytest.mark.parametrize("kind", SCHEDULERS)
def test_trace_invariants(kind):
    trace = _run(kind, "WF-3")
    assert trace.tat_ms > 0
    assert trace.energy_kwh > 0
    assert 0 < trace.utilization <= 1
    assert trace.tasks == 750
    assert trace.problems() == []


def test_zero_task_workflow_is_idle_free():
    trace = simulate(
        get_workflow("WF-2").with_tasks(0), SchedulerKind.FCFS, FrequencyConfig(), SchedulerPolicyParams(), 3
    )
    assert trace.tat_ms == 0.0
    assert trace.energy_kwh == 0.0
    assert trace.problems() == []
    assert trace.with_metrics(tasks=5).problems() != []


def test_unknown_scheduler_is_rejected():
    with pytest.raises(UnsupportedPolicyError):
        policy_for("RR")
    with pytest.raises(UnsupportedPolicyError):
        SchedulerKind.parse("round-robin")


def test_scheduler_labels_parse_both_ways():
    assert SchedulerKind.parse("OM-FNN") is SchedulerKind.OMFNN
    assert SchedulerKind.parse("omfnn") is SchedulerKind.OMFNN
    assert SchedulerKind.OMFNN.label == "OM-FNN"


def test_speculative_duplicates_never_save_energy():
    defaults = POLICY_DICT[SchedulerKind.SAS].default_params()
    with_dups = _run(SchedulerKind.SAS, "WF-5", defaults)
    without = _run(SchedulerKind.SAS, "WF-5", defaults.updated(speculative_dup_rate=0.0))
    assert with_dups.energy_kwh >= without.energy_kwh
    assert with_dups.tat_ms <= without.tat_ms


def test_locality_shortens_the_run():
    defaults = POLICY_DICT[SchedulerKind.LAS].default_params()
    local = _run(SchedulerKind.LAS, "WF-4", defaults.updated(locality_hit_prob=1.0))
    remote = _run(SchedulerKind.LAS, "WF-4", defaults.updated(locality_hit_prob=0.0))
    assert local.tat_ms < remote.tat_ms


def test_frequency_config():
    freq = FrequencyConfig(reduction=0.15, utilization=0.8)
    assert freq.effective_freq == pytest.approx(2.1e9 * 0.8 * 0.85)
    with pytest.raises(ReductionRangeError):
        FrequencyConfig(reduction=0.07)
    with pytest.raises(InvalidParameterError):
        FrequencyConfig(utilization=0.0)


def test_reduction_zero_is_identity():
    base = _run(SchedulerKind.FCFS)
    params = SchedulerPolicyParams(tat_sensitivity=0.4, energy_sensitivity=0.6)
    assert apply_frequency_reduction(base, 0.0, params) == base


def test_reduction_scales_affinely():
    base = _run(SchedulerKind.FCFS, "WF-5")
    params = SchedulerPolicyParams(tat_sensitivity=0.388, energy_sensitivity=0.631)
    reduced = apply_frequency_reduction(base, 0.15, params)
    assert reduced.tat_ms == pytest.approx(base.tat_ms * (1 + 0.388 * 0.15))
    assert reduced.energy_kwh == pytest.approx(base.energy_kwh * (1 - 0.631 * 0.15))
    assert reduced.effective_freq_ghz == pytest.approx(base.effective_freq_ghz * 0.85)
    assert reduced.reduction == 0.15


def test_reduction_outside_gate_is_rejected():
    base = _run(SchedulerKind.FCFS)
    with pytest.raises(ReductionRangeError):
        apply_frequency_reduction(base, 0.25, SchedulerPolicyParams())
    with pytest.raises(ReductionRangeError):
        apply_frequency_reduction(base, 0.12, SchedulerPolicyParams())


def test_reduction_is_monotone():
    base = _run(SchedulerKind.LASP, "WF-2")
    params = SchedulerPolicyParams(tat_sensitivity=0.35, energy_sensitivity=0.5)
    traces = [apply_frequency_reduction(base, level, params) for level in (0.0,) + GATE_LEVELS]
    for before, after in zip(traces, traces[1:]):
        assert after.tat_ms > before.tat_ms
        assert after.energy_kwh < before.energy_kwh


def test_revert_recovers_the_base_trace():
    base = _run(SchedulerKind.SAS, "WF-3")
    params = SchedulerPolicyParams(tat_sensitivity=0.37, energy_sensitivity=0.42)
    for level in GATE_LEVELS:
        back = revert_frequency_reduction(apply_frequency_reduction(base, level, params), params)
        assert back.tat_ms == pytest.approx(base.tat_ms, rel=1e-12)
        assert back.energy_kwh == pytest.approx(base.energy_kwh, rel=1e-12)
        assert back.reduction == 0.0


def test_every_workflow_is_known():
    assert WORKFLOW_IDS == ("WF-1", "WF-2", "WF-3", "WF-4", "WF-5")
    assert [get_workflow(w).task_count for w in WORKFLOW_IDS] == [500, 600, 750, 800, 900]

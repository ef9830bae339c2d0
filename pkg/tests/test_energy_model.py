import math

import pytest

from energy_sched.errors import InvalidInputError, InvalidParameterError
from energy_sched.physics.energy_model import (
    CpuElectrical,
    IoActivity,
    MemoryActivity,
    PowerBreakdown,
    average_power_w,
    cooling_power,
    dynamic_power,
    integrate_energy,
    io_power,
    memory_power,
    run_energy_kwh,
    static_power,
)
from energy_sched.physics.hardware import HardwareProfile


def _cpu(**changes):
    values = dict(
        switching_capacitance=1e-9,
        supply_voltage=1.0,
        clock_frequency=1e9,
        leakage_ref_current=1.0,
        leakage_temp_coeff=0.01,
        leakage_ref_temp=300.0,
    )
    values.update(changes)
    return CpuElectrical(**values)


def _memory(**changes):
    values = dict(
        n_reads=0.0,
        n_writes=0.0,
        energy_per_read=1e-9,
        energy_per_write=1e-9,
        refresh_frequency=64e3,
        energy_per_refresh_at_ref=1e-7,
        refresh_temp_coeff=0.005,
        idle_leakage_current=0.0,
        ref_temp=318.15,
    )
    values.update(changes)
    return MemoryActivity(**values)


def test_dynamic_power_direct_substitution():
    assert dynamic_power(_cpu(), 1e9) == pytest.approx(1.0)
    assert dynamic_power(_cpu(switching_capacitance=0.0), 1e9) == 0.0


def test_dynamic_power_scales_with_frequency():
    elec = _cpu()
    assert dynamic_power(elec, 0.5e9) == pytest.approx(0.5 * dynamic_power(elec, 1e9))


def test_clock_above_hardware_maximum_is_rejected():
    with pytest.raises(InvalidParameterError):
        _cpu(clock_frequency=3e9, max_frequency=2.1e9)


def test_static_power_leakage_curve():
    elec = _cpu()
    assert static_power(elec, 300.0) == 1.0
    assert static_power(elec, 310.0) == pytest.approx(math.exp(0.1), rel=1e-12)
    flat = _cpu(leakage_temp_coeff=0.0)
    assert static_power(flat, 250.0) == static_power(flat, 400.0) == 1.0


def test_static_power_rejects_non_positive_temperature():
    with pytest.raises(InvalidParameterError):
        static_power(_cpu(), 0.0)


def test_memory_power_refresh_grows_with_temperature():
    dynamic, refresh, idle = memory_power(_memory(), 318.15 + 20.0, 1.0, 1.0)
    assert dynamic == 0.0
    assert idle == 0.0
    assert refresh == pytest.approx(7.04e-3)


def test_memory_power_dynamic_term():
    dynamic, refresh, _ = memory_power(_memory(n_reads=1e6), 318.15, 1.0, 1.0)
    assert dynamic == pytest.approx(1e-3)
    assert refresh == pytest.approx(64e3 * 1e-7)


def test_io_power_active_and_idle():
    active, idle = io_power(IoActivity(1e8, 1e-8, 2.0, t_total=10.0, t_active=4.0))
    assert active == pytest.approx(1.0)
    assert idle == pytest.approx(1.2)

    _, busy_idle = io_power(IoActivity(1e8, 1e-8, 2.0, t_total=10.0, t_active=10.0))
    assert busy_idle == 0.0


def test_io_activity_longer_than_window_is_rejected():
    with pytest.raises(InvalidParameterError):
        IoActivity(1e8, 1e-8, 2.0, t_total=1.0, t_active=2.0)


def test_cooling_power():
    assert cooling_power(80.0, 0.8) == pytest.approx(100.0)
    assert cooling_power(42.0, 1.0) == 42.0
    assert cooling_power(0.0, 0.3) == 0.0
    with pytest.raises(InvalidParameterError):
        cooling_power(10.0, 0.0)


def test_power_breakdown_total_is_sum_of_components():
    breakdown = PowerBreakdown(1.5, 2.25, 0.125, 0.0625, 3.0, 4.5, 0.75, 9.0)
    expected = 0.0
    for _, value in breakdown.components():
        expected += value
    assert breakdown.total() == expected
    assert breakdown.it_load() == pytest.approx(expected - 9.0)


def test_power_breakdown_rejects_negative_component():
    with pytest.raises(InvalidParameterError):
        PowerBreakdown(dynamic_w=-1.0)


def test_integrate_energy_rectangle_and_triangle():
    result = integrate_energy([(0.0, 1000.0), (3600.0, 1000.0)])
    assert result.joules == pytest.approx(3.6e6)
    assert result.kwh == pytest.approx(1.0)
    assert integrate_energy([(0.0, 0.0), (5.0, 0.0)]).joules == 0.0
    assert integrate_energy([(0.0, 0.0), (10.0, 100.0)]).joules == pytest.approx(500.0)


@pytest.mark.parametrize(
    "samples",
    [
        [(0.0, 1.0)],
        [(0.0, 1.0), (0.0, 2.0)],
        [(1.0, 1.0), (0.5, 2.0)],
    ],
)
def test_integrate_energy_rejects_bad_timestamps(samples):
    with pytest.raises(InvalidInputError):
        integrate_energy(samples)


def test_average_power_inverts_run_energy():
    energy = run_energy_kwh(890.94, 505.07, 1e5)
    assert energy == pytest.approx(12.50, abs=0.01)
    assert average_power_w(energy, 505.07, 1e5) == pytest.approx(890.94)


def test_hardware_phase_power_settles_above_ambient():
    hardware = HardwareProfile()
    breakdown, temperature = hardware.phase_power("cpu", hardware.base_freq_hz * 0.8)
    assert temperature > hardware.ambient_k
    assert breakdown.cooling_w == pytest.approx(breakdown.it_load() / hardware.cooling_efficiency)
    low, _ = hardware.phase_power("cpu", hardware.base_freq_hz * 0.6)
    assert low.total() < breakdown.total()

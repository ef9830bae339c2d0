"""Component-wise node power and energy integration.

Powers are in watts, energies in joules; kWh appears only in EnergyResult and
the reporting helpers at the bottom of this module.
"""

import math
from dataclasses import dataclass

from energy_sched.errors import InvalidInputError, InvalidParameterError
from energy_sched.utils import BASE_CLOCK_HZ

JOULES_PER_KWH = 3.6e6


def _require(condition, message):
    if not condition:
        raise InvalidParameterError(message)


# ─── Data Classes ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class CpuElectrical:
    switching_capacitance: float
    supply_voltage: float
    clock_frequency: float
    leakage_ref_current: float
    leakage_temp_coeff: float
    leakage_ref_temp: float
    max_frequency: float = BASE_CLOCK_HZ

    def __post_init__(self):
        _require(self.switching_capacitance >= 0, "switching capacitance must be >= 0")
        _require(self.supply_voltage > 0, "supply voltage must be > 0")
        _require(self.clock_frequency > 0, "clock frequency must be > 0")
        _require(
            self.clock_frequency <= self.max_frequency * (1 + 1e-12),
            f"clock frequency {self.clock_frequency:.4g} Hz exceeds hardware "
            f"maximum {self.max_frequency:.4g} Hz",
        )
        _require(self.leakage_ref_current > 0, "leakage reference current must be > 0")
        _require(self.leakage_temp_coeff >= 0, "leakage temperature coefficient must be >= 0")
        _require(self.leakage_ref_temp > 0, "leakage reference temperature must be > 0")


@dataclass(frozen=True)
class MemoryActivity:
    n_reads: float
    n_writes: float
    energy_per_read: float
    energy_per_write: float
    refresh_frequency: float
    energy_per_refresh_at_ref: float
    refresh_temp_coeff: float
    idle_leakage_current: float
    ref_temp: float = 318.15
    leakage_temp_coeff: float = 0.0

    def __post_init__(self):
        _require(self.n_reads >= 0 and self.n_writes >= 0, "memory counts must be >= 0")
        _require(
            min(self.energy_per_read, self.energy_per_write, self.energy_per_refresh_at_ref) >= 0,
            "memory energies must be >= 0",
        )
        _require(self.refresh_frequency > 0, "refresh frequency must be > 0")
        _require(self.idle_leakage_current >= 0, "idle leakage current must be >= 0")


@dataclass(frozen=True)
class IoActivity:
    transfer_rate: float
    energy_per_byte: float
    idle_power: float
    t_total: float
    t_active: float

    def __post_init__(self):
        _require(self.transfer_rate >= 0, "transfer rate must be >= 0")
        _require(self.energy_per_byte >= 0 and self.idle_power >= 0, "I/O energies must be >= 0")
        _require(self.t_active >= 0, "t_active must be >= 0")
        _require(
            self.t_active <= self.t_total,
            f"t_active {self.t_active} exceeds t_total {self.t_total}",
        )


@dataclass(frozen=True)
class PowerBreakdown:
    dynamic_w: float = 0.0
    static_w: float = 0.0
    memory_dynamic_w: float = 0.0
    memory_refresh_w: float = 0.0
    memory_idle_w: float = 0.0
    io_active_w: float = 0.0
    io_idle_w: float = 0.0
    cooling_w: float = 0.0

    def __post_init__(self):
        for name, value in self.components():
            _require(value >= 0, f"{name} must be >= 0, got {value}")

    def components(self):
        return (
            ("dynamic_w", self.dynamic_w),
            ("static_w", self.static_w),
            ("memory_dynamic_w", self.memory_dynamic_w),
            ("memory_refresh_w", self.memory_refresh_w),
            ("memory_idle_w", self.memory_idle_w),
            ("io_active_w", self.io_active_w),
            ("io_idle_w", self.io_idle_w),
            ("cooling_w", self.cooling_w),
        )

    def it_load(self):
        """Everything except cooling: the heat the node has to shed."""
        total = 0.0
        for name, value in self.components():
            if name != "cooling_w":
                total += value
        return total

    def total(self):
        # fixed left-to-right order, never reassociated
        total = 0.0
        for _, value in self.components():
            total += value
        return total


@dataclass(frozen=True)
class EnergyResult:
    joules: float
    kwh: float

    @classmethod
    def from_joules(cls, joules):
        if joules < 0:
            raise InvalidParameterError(f"energy must be >= 0, got {joules}")
        return cls(joules=joules, kwh=joules / JOULES_PER_KWH)


# ─── Component Powers ─────────────────────────────────────────────────────────


def dynamic_power(elec, effective_freq):
    _require(effective_freq > 0, f"effective frequency must be > 0, got {effective_freq}")
    return elec.switching_capacitance * elec.supply_voltage**2 * effective_freq


def leakage_current(elec, temperature):
    _require(temperature > 0, f"temperature must be > 0 K, got {temperature}")
    return elec.leakage_ref_current * math.exp(
        elec.leakage_temp_coeff * (temperature - elec.leakage_ref_temp)
    )


def static_power(elec, temperature):
    return leakage_current(elec, temperature) * elec.supply_voltage


def memory_power(mem, temperature, supply_voltage, window):
    """Returns (dynamic, refresh, idle) watts for `window` seconds of activity."""
    _require(window > 0, f"window must be > 0, got {window}")
    _require(temperature > 0, f"temperature must be > 0 K, got {temperature}")
    dynamic = (mem.n_reads * mem.energy_per_read + mem.n_writes * mem.energy_per_write) / window
    # refresh grows linearly above the reference temperature, never below zero
    refresh_energy = mem.energy_per_refresh_at_ref * max(
        0.0, 1.0 + mem.refresh_temp_coeff * (temperature - mem.ref_temp)
    )
    refresh = mem.refresh_frequency * refresh_energy
    idle_current = mem.idle_leakage_current * math.exp(
        mem.leakage_temp_coeff * (temperature - mem.ref_temp)
    )
    idle = idle_current * supply_voltage
    return dynamic, refresh, idle


def io_power(io):
    """Returns (active, idle) watts; idle is averaged over t_total."""
    active = io.transfer_rate * io.energy_per_byte
    if io.t_total == 0:
        return active, 0.0
    idle_energy = io.idle_power * (io.t_total - io.t_active)
    return active, idle_energy / io.t_total


def cooling_power(q_removed, efficiency):
    _require(0 < efficiency <= 1, f"cooling efficiency must be in (0, 1], got {efficiency}")
    _require(q_removed >= 0, f"removed heat must be >= 0, got {q_removed}")
    return q_removed / efficiency


def dvfs_voltage(freq, v_min, v_max, f_max=BASE_CLOCK_HZ):
    """Supply voltage for `freq` on a linear V/f curve."""
    _require(0 < freq <= f_max * (1 + 1e-12), f"frequency {freq} outside (0, {f_max}]")
    return v_min + (v_max - v_min) * freq / f_max


# ─── Integration ──────────────────────────────────────────────────────────────


def integrate_energy(power_samples):
    """Trapezoidal integral of (t seconds, watts) samples."""
    samples = list(power_samples)
    if len(samples) < 2:
        raise InvalidInputError(f"need at least 2 power samples, got {len(samples)}")
    areas = []
    for (t0, p0), (t1, p1) in zip(samples, samples[1:]):
        if not t1 > t0:
            raise InvalidInputError(f"timestamps must be strictly increasing: {t0} then {t1}")
        areas.append(0.5 * (p0 + p1) * (t1 - t0))
    return EnergyResult.from_joules(math.fsum(areas))


def segment_joules(watts, seconds):
    """Energy of a constant-power segment."""
    if seconds <= 0:
        return 0.0
    return integrate_energy(((0.0, watts), (seconds, watts))).joules


def report_kwh(joules, scale=1.0):
    return joules / JOULES_PER_KWH * scale


def run_energy_kwh(power_w, tat_ms, scale=1.0):
    """Energy of a run at average power `power_w` lasting `tat_ms` milliseconds."""
    return report_kwh(power_w * tat_ms / 1000.0, scale)


def average_power_w(energy_kwh, tat_ms, scale=1.0):
    if tat_ms <= 0:
        return 0.0
    return energy_kwh / scale * JOULES_PER_KWH / (tat_ms / 1000.0)

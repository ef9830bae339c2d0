import logging
from dataclasses import dataclass

from energy_sched.physics.energy_model import (
    CpuElectrical,
    IoActivity,
    MemoryActivity,
    PowerBreakdown,
    cooling_power,
    dvfs_voltage,
    dynamic_power,
    io_power,
    memory_power,
    static_power,
)
from energy_sched.physics.thermal import LumpedNode, steady_state_lumped
from energy_sched.utils import BASE_CLOCK_HZ

logger = logging.getLogger(__name__)

# Activity factors (cpu switching, memory traffic, I/O transfer) per task phase.
PHASE_ACTIVITY = {
    "cpu": (1.0, 0.2, 0.0),
    "mem": (0.3, 1.0, 0.0),
    "io": (0.1, 0.1, 1.0),
}

_FIXED_POINT_ITERS = 50
_FIXED_POINT_TOL = 1e-9


@dataclass(frozen=True)
class HardwareProfile:
    """Electrical and thermal description of one compute node."""

    base_freq_hz: float = BASE_CLOCK_HZ
    v_min: float = 0.80
    v_max: float = 1.10
    switching_capacitance_f: float = 2.5e-7
    leakage_ref_current_a: float = 40.0
    leakage_temp_coeff: float = 0.02
    leakage_ref_temp_k: float = 318.15
    mem_read_rate_per_s: float = 4e9
    mem_write_rate_per_s: float = 2e9
    energy_per_read_j: float = 2e-8
    energy_per_write_j: float = 2.5e-8
    refresh_frequency_hz: float = 128e3
    energy_per_refresh_j: float = 2e-4
    refresh_temp_coeff: float = 0.005
    mem_idle_leakage_a: float = 10.0
    io_transfer_rate_bps: float = 2e9
    io_energy_per_byte_j: float = 2e-8
    io_idle_power_w: float = 30.0
    cooling_efficiency: float = 0.8
    ambient_k: float = 295.15
    thermal_resistance_k_per_w: float = 0.008
    thermal_capacitance_j_per_k: float = 2000.0

    @property
    def node(self):
        return LumpedNode(
            thermal_resistance=self.thermal_resistance_k_per_w,
            thermal_capacitance=self.thermal_capacitance_j_per_k,
            ambient=self.ambient_k,
        )

    def cpu(self, freq_hz):
        return CpuElectrical(
            switching_capacitance=self.switching_capacitance_f,
            supply_voltage=dvfs_voltage(freq_hz, self.v_min, self.v_max, self.base_freq_hz),
            clock_frequency=freq_hz,
            leakage_ref_current=self.leakage_ref_current_a,
            leakage_temp_coeff=self.leakage_temp_coeff,
            leakage_ref_temp=self.leakage_ref_temp_k,
            max_frequency=self.base_freq_hz,
        )

    def memory(self, activity, window=1.0):
        return MemoryActivity(
            n_reads=self.mem_read_rate_per_s * activity * window,
            n_writes=self.mem_write_rate_per_s * activity * window,
            energy_per_read=self.energy_per_read_j,
            energy_per_write=self.energy_per_write_j,
            refresh_frequency=self.refresh_frequency_hz,
            energy_per_refresh_at_ref=self.energy_per_refresh_j,
            refresh_temp_coeff=self.refresh_temp_coeff,
            idle_leakage_current=self.mem_idle_leakage_a,
            ref_temp=self.leakage_ref_temp_k,
        )

    def io(self, activity, window=1.0):
        return IoActivity(
            transfer_rate=self.io_transfer_rate_bps,
            energy_per_byte=self.io_energy_per_byte_j,
            idle_power=self.io_idle_power_w,
            t_total=window,
            t_active=activity * window,
        )

    def breakdown(self, phase, freq_hz, temperature):
        cpu_act, mem_act, io_act = PHASE_ACTIVITY[phase]
        elec = self.cpu(freq_hz)
        mem_dyn, mem_refresh, mem_idle = memory_power(
            self.memory(mem_act), temperature, elec.supply_voltage, 1.0
        )
        io_active, io_idle = io_power(self.io(io_act))
        it = PowerBreakdown(
            dynamic_w=cpu_act * dynamic_power(elec, freq_hz),
            static_w=static_power(elec, temperature),
            memory_dynamic_w=mem_dyn,
            memory_refresh_w=mem_refresh,
            memory_idle_w=mem_idle,
            io_active_w=io_act * io_active,
            io_idle_w=io_idle,
        )
        # at steady state the cooling loop removes the full IT load
        return PowerBreakdown(
            **{name: value for name, value in it.components() if name != "cooling_w"},
            cooling_w=cooling_power(it.it_load(), self.cooling_efficiency),
        )

    def phase_power(self, phase, freq_hz):
        """Steady-state breakdown with leakage and refresh evaluated at the node temperature."""
        node = self.node
        temperature = node.ambient
        breakdown = self.breakdown(phase, freq_hz, temperature)
        for _ in range(_FIXED_POINT_ITERS):
            new_temperature = steady_state_lumped(node, breakdown.it_load())
            breakdown = self.breakdown(phase, freq_hz, new_temperature)
            if abs(new_temperature - temperature) < _FIXED_POINT_TOL:
                temperature = new_temperature
                break
            temperature = new_temperature
        else:
            logger.warning("thermal fixed point did not settle for %s at %.3g Hz", phase, freq_hz)
        return breakdown, temperature

from energy_sched.physics.energy_model import (
    CpuElectrical,
    EnergyResult,
    IoActivity,
    MemoryActivity,
    PowerBreakdown,
    cooling_power,
    dynamic_power,
    integrate_energy,
    io_power,
    memory_power,
    static_power,
)
from energy_sched.physics.hardware import HardwareProfile
from energy_sched.physics.thermal import (
    LumpedNode,
    ThermalGrid1D,
    ThermalLimits,
    ThermalMaterial,
    cfd_penalty,
    check_thermal_feasibility,
    step_heat_equation,
    steady_state_lumped,
    thermal_profile,
)

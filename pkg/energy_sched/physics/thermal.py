"""Thermal stand-ins for the CFD stage.

Two models share this module: an explicit 1-D finite-difference solver of the
advective heat equation for checking the physics, and a lumped RC node that is
cheap enough to sit inside the simulator and the generator.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from energy_sched.errors import InvalidInputError, InvalidParameterError, StabilityError

logger = logging.getLogger(__name__)

TEMPERATURE_CSV_COLUMNS = ["t_seconds", "temp_kelvin", "q_removed_watts"]


# ─── Data Classes ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ThermalMaterial:
    density: float
    specific_heat: float
    conductivity: float

    def __post_init__(self):
        if min(self.density, self.specific_heat, self.conductivity) <= 0:
            raise InvalidParameterError("material properties must all be > 0")

    @property
    def diffusivity(self):
        return self.conductivity / (self.density * self.specific_heat)


# air at roughly 300 K
AIR = ThermalMaterial(density=1.16, specific_heat=1007.0, conductivity=0.026)


@dataclass(frozen=True)
class ThermalGrid1D:
    dx: float
    temperatures: np.ndarray
    velocity: float = 0.0
    ambient: float = 295.15

    def __post_init__(self):
        temps = np.asarray(self.temperatures, dtype=np.float64)
        object.__setattr__(self, "temperatures", temps)
        if temps.ndim != 1 or temps.size < 3:
            raise InvalidParameterError("grid needs at least 3 cells")
        if self.dx <= 0:
            raise InvalidParameterError(f"dx must be > 0, got {self.dx}")
        if not np.all(np.isfinite(temps)) or np.any(temps <= 0):
            raise InvalidParameterError("cell temperatures must be finite and > 0 K")
        if self.ambient <= 0:
            raise InvalidParameterError("ambient must be > 0 K")

    @property
    def n_cells(self):
        return self.temperatures.size

    @classmethod
    def uniform(cls, n_cells, dx, temperature, velocity=0.0, ambient=None):
        ambient = temperature if ambient is None else ambient
        return cls(dx=dx, temperatures=np.full(n_cells, float(temperature)),
                   velocity=velocity, ambient=ambient)


@dataclass(frozen=True)
class ThermalLimits:
    max_core_temp: float = 358.0
    max_power: float = 4500.0

    def __post_init__(self):
        if self.max_core_temp <= 0 or self.max_power <= 0:
            raise InvalidParameterError("thermal limits must be > 0")


@dataclass(frozen=True)
class LumpedNode:
    thermal_resistance: float = 0.008
    thermal_capacitance: float = 2000.0
    ambient: float = 295.15

    def __post_init__(self):
        if self.thermal_resistance <= 0 or self.thermal_capacitance <= 0:
            raise InvalidParameterError("thermal resistance and capacitance must be > 0")
        if self.ambient <= 0:
            raise InvalidParameterError("ambient must be > 0 K")

    @property
    def time_constant(self):
        return self.thermal_resistance * self.thermal_capacitance


# ─── Finite-Difference Solver ─────────────────────────────────────────────────


def max_stable_dt(grid, material):
    """Largest dt for which the explicit step is a convex combination of neighbours."""
    alpha = material.diffusivity
    rate = 2.0 * alpha / grid.dx**2 + abs(grid.velocity) / grid.dx
    return 1.0 / rate


def step_heat_equation(grid, material, source_w_per_m3, dt):
    """One explicit step: central diffusion, upwind advection, Dirichlet ambient ends."""
    source = np.asarray(source_w_per_m3, dtype=np.float64)
    if source.shape != grid.temperatures.shape:
        raise InvalidParameterError(
            f"source has shape {source.shape}, grid has {grid.temperatures.shape}"
        )
    if dt <= 0:
        raise StabilityError(f"dt must be > 0, got {dt}")

    alpha = material.diffusivity
    dx = grid.dx
    v = grid.velocity
    diffusion_bound = 0.5 * dx**2 / alpha
    if dt > diffusion_bound:
        raise StabilityError(f"dt {dt:.4g} s exceeds diffusion bound {diffusion_bound:.4g} s")
    if v != 0 and dt > dx / abs(v):
        raise StabilityError(f"dt {dt:.4g} s exceeds advective bound {dx / abs(v):.4g} s")
    combined_bound = max_stable_dt(grid, material)
    if dt > combined_bound * (1 + 1e-12):
        advective = f", advective {dx / abs(v):.4g} s" if v != 0 else ""
        raise StabilityError(
            f"dt {dt:.4g} s is within the diffusion ({diffusion_bound:.4g} s){advective} bounds "
            f"but exceeds their combined bound {combined_bound:.4g} s "
            "(dt * (2k/(rho*c_p*dx^2) + |v|/dx) must be <= 1 for the maximum principle)"
        )

    T = grid.temperatures
    new = T.copy()
    lap = (T[2:] - 2.0 * T[1:-1] + T[:-2]) / dx**2
    if v > 0:
        grad = (T[1:-1] - T[:-2]) / dx
    elif v < 0:
        grad = (T[2:] - T[1:-1]) / dx
    else:
        grad = np.zeros_like(lap)
    heating = source[1:-1] / (material.density * material.specific_heat)
    new[1:-1] = T[1:-1] + dt * (alpha * lap - v * grad + heating)
    new[0] = grid.ambient
    new[-1] = grid.ambient

    if not np.all(np.isfinite(new)):
        raise StabilityError("step produced non-finite temperatures")
    return replace(grid, temperatures=new)


def solve_heat_equation(grid, material, source_w_per_m3, t_end, dt=None, safety=0.9):
    """March `grid` to `t_end` seconds; the last step is shortened to land exactly."""
    if t_end < 0:
        raise InvalidParameterError(f"t_end must be >= 0, got {t_end}")
    if dt is None:
        dt = safety * max_stable_dt(grid, material)
    n_full = int(math.floor(t_end / dt))
    for _ in range(n_full):
        grid = step_heat_equation(grid, material, source_w_per_m3, dt)
    remainder = t_end - n_full * dt
    if remainder > 1e-12 * max(1.0, t_end):
        grid = step_heat_equation(grid, material, source_w_per_m3, remainder)
    return grid


# ─── Lumped Node ──────────────────────────────────────────────────────────────


def steady_state_lumped(node, q_in):
    if q_in < 0:
        raise InvalidParameterError(f"heat input must be >= 0, got {q_in}")
    return node.ambient + q_in * node.thermal_resistance


def thermal_profile(power_trace, node, initial_temp=None):
    """Temperature and removed heat at each trace timestamp.

    Q is held constant from one sample to the next and the RC equation is
    advanced with its exact exponential update.
    """
    trace = list(power_trace)
    if not trace:
        return []
    for (t0, _), (t1, _) in zip(trace, trace[1:]):
        if not t1 > t0:
            raise InvalidInputError(f"trace timestamps must be strictly increasing: {t0} then {t1}")

    R = node.thermal_resistance
    tau = node.time_constant
    temp = node.ambient if initial_temp is None else float(initial_temp)
    rows = [(trace[0][0], temp, (temp - node.ambient) / R)]
    for (t0, q0), (t1, _) in zip(trace, trace[1:]):
        target = steady_state_lumped(node, q0)
        temp = target + (temp - target) * math.exp(-(t1 - t0) / tau)
        rows.append((t1, temp, (temp - node.ambient) / R))
    return rows


def check_thermal_feasibility(peak_power, limits, node):
    if peak_power < 0:
        raise InvalidParameterError(f"peak power must be >= 0, got {peak_power}")
    if peak_power > limits.max_power:
        return False
    return steady_state_lumped(node, peak_power) <= limits.max_core_temp


def cfd_penalty(predicted_energy, constraint_energy):
    """Absolute gap between decoded and physics-recomputed energy, per sample."""
    return np.abs(np.subtract(constraint_energy, predicted_energy))


def write_temperature_csv(path, rows):
    frame = pd.DataFrame(list(rows), columns=TEMPERATURE_CSV_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
    logger.debug("wrote %d temperature samples to %s", len(frame), path)

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace

from energy_sched.errors import InvalidParameterError
from energy_sched.utils import GATE_LEVELS, REFERENCE_UTILIZATION

# Fraction of an I/O phase saved when the task's data is already local.
LOCALITY_IO_SAVING = 0.5


def _unit_gains():
    return {level: 1.0 for level in GATE_LEVELS}


@dataclass(frozen=True)
class SchedulerPolicyParams:
    locality_hit_prob: float = 0.0
    prefetch_overlap: float = 0.0
    speculative_dup_rate: float = 0.0
    base_cpu_boost: float = 1.0
    power_multiplier: float = 1.0
    tat_sensitivity: float = 0.0
    energy_sensitivity: float = 0.0
    delay_weight: float = 1.0
    tat_level_gain: dict = field(default_factory=_unit_gains)
    energy_level_gain: dict = field(default_factory=_unit_gains)

    def __post_init__(self):
        for name in ("locality_hit_prob", "prefetch_overlap", "speculative_dup_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {value}")
        if self.base_cpu_boost <= 0 or self.power_multiplier <= 0:
            raise InvalidParameterError("boost and power multiplier must be > 0")
        if self.tat_sensitivity < 0 or self.energy_sensitivity < 0:
            raise InvalidParameterError("sensitivities must be >= 0")
        if self.delay_weight < 0:
            raise InvalidParameterError("delay weight must be >= 0")
        object.__setattr__(self, "tat_level_gain", _normalize_gains(self.tat_level_gain))
        object.__setattr__(self, "energy_level_gain", _normalize_gains(self.energy_level_gain))

    def tat_gain(self, reduction):
        return self.tat_level_gain.get(round(reduction, 6), 1.0)

    def energy_gain(self, reduction):
        return self.energy_level_gain.get(round(reduction, 6), 1.0)

    def updated(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {
            "locality_hit_prob": self.locality_hit_prob,
            "prefetch_overlap": self.prefetch_overlap,
            "speculative_dup_rate": self.speculative_dup_rate,
            "base_cpu_boost": self.base_cpu_boost,
            "power_multiplier": self.power_multiplier,
            "tat_sensitivity": self.tat_sensitivity,
            "energy_sensitivity": self.energy_sensitivity,
            "delay_weight": self.delay_weight,
            "tat_level_gain": {f"{k:.2f}": v for k, v in sorted(self.tat_level_gain.items())},
            "energy_level_gain": {f"{k:.2f}": v for k, v in sorted(self.energy_level_gain.items())},
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        for key in ("tat_level_gain", "energy_level_gain"):
            if key in data:
                data[key] = {float(k): float(v) for k, v in data[key].items()}
        return cls(**data)


def _normalize_gains(gains):
    normalized = _unit_gains()
    for level, gain in dict(gains).items():
        if gain <= 0:
            raise InvalidParameterError(f"level gain must be > 0, got {gain} at {level}")
        normalized[round(float(level), 6)] = float(gain)
    return normalized


@dataclass(frozen=True)
class TaskDraw:
    index: int
    duration_ms: float
    locality_u: float
    duplicate_ms: float = None


@dataclass(frozen=True)
class Segment:
    phase: str
    duration_ms: float
    freq_scale: float = 1.0


@dataclass(frozen=True)
class TaskPlan:
    """Critical-path time of one task and every segment whose energy it costs."""

    path_ms: float
    segments: tuple


class BasePolicy(ABC):
    kind = None
    utilization = REFERENCE_UTILIZATION
    # per-task frequency scales the policy may pick from
    freq_scales = (1.0,)

    def __init__(self, params):
        self.params = params

    @classmethod
    @abstractmethod
    def default_params(cls):
        pass

    @abstractmethod
    def plan_task(self, draw, wf, timing):
        pass

    def phase_times(self, duration_ms, wf, timing, freq_scale=1.0, local=False):
        """(cpu, mem, io) milliseconds of one task copy."""
        cpu = duration_ms * wf.cpu_fraction * timing.cpu_slowdown / freq_scale
        mem = duration_ms * wf.mem_fraction
        io = duration_ms * wf.io_fraction
        if local:
            io *= 1.0 - LOCALITY_IO_SAVING
        return cpu, mem, io

    def is_local(self, draw):
        return draw.locality_u < self.params.locality_hit_prob

    def overlapped_plan(self, cpu, mem, io, freq_scale=1.0):
        """Prefetch hides `prefetch_overlap` of the I/O behind compute; it still costs energy."""
        hidden = min(io * self.params.prefetch_overlap, cpu)
        segments = (
            Segment("cpu", cpu, freq_scale),
            Segment("mem", mem, freq_scale),
            Segment("io", io, freq_scale),
        )
        return TaskPlan(path_ms=cpu + mem + io - hidden, segments=segments)

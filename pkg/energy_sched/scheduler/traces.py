import math
from dataclasses import asdict, dataclass, replace

from energy_sched.errors import InvalidParameterError
from energy_sched.utils import BASE_CLOCK_HZ, REDUCTION_LEVELS, SchedulerKind, check_reduction


@dataclass(frozen=True)
class FrequencyConfig:
    base_freq: float = BASE_CLOCK_HZ
    reduction: float = 0.0
    utilization: float = 0.80

    def __post_init__(self):
        object.__setattr__(self, "reduction", check_reduction(self.reduction, REDUCTION_LEVELS))
        if not 0.0 < self.utilization <= 1.0:
            raise InvalidParameterError(f"utilization must lie in (0, 1], got {self.utilization}")
        if self.base_freq <= 0:
            raise InvalidParameterError("base frequency must be > 0")

    @property
    def effective_freq(self):
        return self.base_freq * self.utilization * (1.0 - self.reduction)


@dataclass(frozen=True)
class ExecutionTrace:
    """One (scheduler, workflow, frequency) run, in the units of the published tables."""

    scheduler: SchedulerKind
    workflow: str
    tasks: int
    tat_ms: float
    avg_power_w: float
    energy_kwh: float
    effective_freq_ghz: float = float("nan")
    utilization: float = float("nan")
    reduction: float = 0.0

    def problems(self):
        """Invariant violations; missing (NaN) metrics are not violations.

        TAT and energy must be positive for any run with tasks; an empty
        workflow is the one trace allowed to be all zeros.
        """
        found = []
        if self.tasks < 0:
            found.append(f"tasks must be >= 0, got {self.tasks}")
        positive = ("tat_ms", "energy_kwh") if self.tasks > 0 else ()
        for name in ("tat_ms", "avg_power_w", "energy_kwh"):
            value = getattr(self, name)
            if math.isinf(value):
                found.append(f"{name} must be finite")
            elif value < 0:
                found.append(f"{name} must be >= 0, got {value}")
            elif value == 0 and name in positive:
                found.append(f"{name} must be > 0 for a run with {self.tasks} tasks")
        if not math.isnan(self.utilization) and not 0.0 < self.utilization <= 1.0:
            found.append(f"utilization must lie in (0, 1], got {self.utilization}")
        return found

    @property
    def key(self):
        return (self.scheduler, self.workflow)

    def to_dict(self):
        row = asdict(self)
        row["scheduler"] = self.scheduler.label
        return row

    def with_metrics(self, **changes):
        return replace(self, **changes)

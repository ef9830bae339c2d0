import math
from dataclasses import dataclass

from energy_sched.errors import InvalidInputError, InvalidParameterError


@dataclass(frozen=True)
class WorkflowSpec:
    id: str
    description: str
    task_count: int
    resource_level: str
    base_task_ms: float
    cpu_fraction: float
    mem_fraction: float
    io_fraction: float

    def __post_init__(self):
        if self.task_count < 0:
            raise InvalidParameterError(f"{self.id}: task count must be >= 0")
        if self.base_task_ms <= 0:
            raise InvalidParameterError(f"{self.id}: base task duration must be > 0")
        fractions = (self.cpu_fraction, self.mem_fraction, self.io_fraction)
        if any(not 0.0 <= f <= 1.0 for f in fractions):
            raise InvalidParameterError(f"{self.id}: phase fractions must lie in [0, 1]")
        if not math.isclose(math.fsum(fractions), 1.0, abs_tol=1e-9):
            raise InvalidParameterError(f"{self.id}: phase fractions must sum to 1")

    def with_tasks(self, task_count):
        return WorkflowSpec(
            id=self.id,
            description=self.description,
            task_count=task_count,
            resource_level=self.resource_level,
            base_task_ms=self.base_task_ms,
            cpu_fraction=self.cpu_fraction,
            mem_fraction=self.mem_fraction,
            io_fraction=self.io_fraction,
        )


# High-energy-physics workflows, modeled as task sets with a fixed phase mix.
WORKFLOW_DICT = {
    "WF-1": WorkflowSpec("WF-1", "Event Reconstruction", 500, "Low/Mid", 1.0, 0.55, 0.20, 0.25),
    "WF-2": WorkflowSpec("WF-2", "Identifying Particle Trajectories", 600, "Mid", 1.0, 0.50, 0.22, 0.28),
    "WF-3": WorkflowSpec("WF-3", "Identifying Collision Points", 750, "Mid", 1.0, 0.50, 0.20, 0.30),
    "WF-4": WorkflowSpec("WF-4", "Pattern Recognition", 800, "High", 1.0, 0.45, 0.25, 0.30),
    "WF-5": WorkflowSpec("WF-5", "Anomaly Detection", 900, "High", 1.0, 0.45, 0.22, 0.33),
}

WORKFLOW_IDS = tuple(WORKFLOW_DICT)


def get_workflow(workflow_id):
    try:
        return WORKFLOW_DICT[str(workflow_id).strip().upper()]
    except KeyError:
        raise InvalidInputError(
            f"unknown workflow {workflow_id!r}, available: {', '.join(WORKFLOW_IDS)}"
        ) from None

from energy_sched.scheduler.base_policy import BasePolicy, Segment, SchedulerPolicyParams, TaskPlan
from energy_sched.utils import SchedulerKind


class FCFSPolicy(BasePolicy):
    """Serial queue in arrival order; every phase sits on the critical path."""

    kind = SchedulerKind.FCFS
    utilization = 0.80

    @classmethod
    def default_params(cls):
        return SchedulerPolicyParams()

    def plan_task(self, draw, wf, timing):
        cpu, mem, io = self.phase_times(draw.duration_ms, wf, timing)
        return TaskPlan(
            path_ms=cpu + mem + io,
            segments=(Segment("cpu", cpu), Segment("mem", mem), Segment("io", io)),
        )

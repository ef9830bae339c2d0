from energy_sched.scheduler.base_policy import BasePolicy, Segment, SchedulerPolicyParams, TaskPlan
from energy_sched.utils import SchedulerKind


class LASPolicy(BasePolicy):
    """Locality-aware placement: a hit shortens the task's I/O phase."""

    kind = SchedulerKind.LAS
    utilization = 0.81

    @classmethod
    def default_params(cls):
        return SchedulerPolicyParams(locality_hit_prob=0.6)

    def plan_task(self, draw, wf, timing):
        cpu, mem, io = self.phase_times(draw.duration_ms, wf, timing, local=self.is_local(draw))
        return TaskPlan(
            path_ms=cpu + mem + io,
            segments=(Segment("cpu", cpu), Segment("mem", mem), Segment("io", io)),
        )


class LASPPolicy(BasePolicy):
    """Locality-aware with prefetching of overlapping data accesses."""

    kind = SchedulerKind.LASP
    utilization = 0.88

    @classmethod
    def default_params(cls):
        return SchedulerPolicyParams(locality_hit_prob=0.6, prefetch_overlap=0.30)

    def plan_task(self, draw, wf, timing):
        cpu, mem, io = self.phase_times(draw.duration_ms, wf, timing, local=self.is_local(draw))
        return self.overlapped_plan(cpu, mem, io)


class LYNXPolicy(LASPPolicy):
    """Predictive prefetching; same mechanics as LASP with its own calibration."""

    kind = SchedulerKind.LYNX
    utilization = 0.87

    @classmethod
    def default_params(cls):
        return SchedulerPolicyParams(locality_hit_prob=0.62, prefetch_overlap=0.26)

from energy_sched.scheduler.base_policy import BasePolicy, SchedulerPolicyParams, TaskPlan
from energy_sched.utils import SchedulerKind


class SASPolicy(BasePolicy):
    """Locality, prefetching and speculative duplicates of straggler tasks.

    A duplicated task finishes when the faster copy does, but both copies run
    to completion and both are charged.
    """

    kind = SchedulerKind.SAS
    utilization = 0.96

    @classmethod
    def default_params(cls):
        return SchedulerPolicyParams(
            locality_hit_prob=0.6, prefetch_overlap=0.30, speculative_dup_rate=0.10
        )

    def plan_task(self, draw, wf, timing):
        local = self.is_local(draw)
        original = self.overlapped_plan(*self.phase_times(draw.duration_ms, wf, timing, local=local))
        if draw.duplicate_ms is None:
            return original
        duplicate = self.overlapped_plan(
            *self.phase_times(draw.duplicate_ms, wf, timing, local=local)
        )
        return TaskPlan(
            path_ms=min(original.path_ms, duplicate.path_ms),
            segments=original.segments + duplicate.segments,
        )

from energy_sched.scheduler.base_policy import BasePolicy, SchedulerPolicyParams
from energy_sched.utils import SchedulerKind


class OMFNNPolicy(BasePolicy):
    """Energy-minimizing placement stand-in.

    Per task, picks the frequency scale minimizing predicted energy times
    delay**delay_weight. The prediction uses the same phase powers the
    simulator charges, so the choice is independent of the calibrated boost
    and power multiplier.
    """

    kind = SchedulerKind.OMFNN
    utilization = 0.90
    freq_scales = (1.0, 0.95, 0.90, 0.85, 0.80)

    @classmethod
    def default_params(cls):
        return SchedulerPolicyParams(locality_hit_prob=0.6, prefetch_overlap=0.30, delay_weight=1.0)

    def plan_task(self, draw, wf, timing):
        local = self.is_local(draw)
        best_plan, best_cost = None, None
        for scale in self.freq_scales:
            plan = self.overlapped_plan(
                *self.phase_times(draw.duration_ms, wf, timing, freq_scale=scale, local=local),
                freq_scale=scale,
            )
            energy = sum(timing.power(seg.phase, seg.freq_scale) * seg.duration_ms for seg in plan.segments)
            cost = energy * plan.path_ms**self.params.delay_weight
            if best_cost is None or cost < best_cost:
                best_plan, best_cost = plan, cost
        return best_plan

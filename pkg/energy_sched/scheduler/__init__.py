from energy_sched.scheduler.base_policy import BasePolicy, SchedulerPolicyParams
from energy_sched.scheduler.fcfs_policy import FCFSPolicy
from energy_sched.scheduler.locality_policy import LASPolicy, LASPPolicy, LYNXPolicy
from energy_sched.scheduler.omfnn_policy import OMFNNPolicy
from energy_sched.scheduler.speculative_policy import SASPolicy
from energy_sched.utils import SchedulerKind

POLICY_DICT = {
    SchedulerKind.FCFS: FCFSPolicy,
    SchedulerKind.LAS: LASPolicy,
    SchedulerKind.LASP: LASPPolicy,
    SchedulerKind.LYNX: LYNXPolicy,
    SchedulerKind.SAS: SASPolicy,
    SchedulerKind.OMFNN: OMFNNPolicy,
}

from energy_sched.analysis.optimizer import (
    ObjectiveWeights,
    SweepCell,
    SweetSpotResult,
    best_by_workflow,
    sweep,
    sweet_spot,
    tradeoff_report,
)
from energy_sched.analysis.uq import BootstrapConfig, BootstrapResult, bootstrap_diff_means, quantile

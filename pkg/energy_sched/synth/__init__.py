from energy_sched.synth.artifact import ModelArtifact, load_model, save_model
from energy_sched.synth.pivae import (
    EnergyConsistency,
    LossBreakdown,
    VaeHyper,
    VaeParams,
    backprop_step,
    decode,
    encode,
    generate,
    loss,
    reparameterize,
    train,
)
from energy_sched.synth.preprocessing import (
    Dataset,
    FeatureSchema,
    SyntheticRecord,
    assemble,
    invert,
    min_max_scale,
    one_hot,
)
from energy_sched.synth.validation import is_acceptable, validate_batch

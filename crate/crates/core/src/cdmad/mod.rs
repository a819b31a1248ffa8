//! Probe-based classifier-bias measurement and debiasing: pseudo-label
//! refinement during training, prediction refinement at test time, and the
//! logit-adjustment baseline.

mod probe;
mod refine;

pub use probe::{
    make_probe, measure_bias, BiasLogits, ProbeInput, ProbeKind, RandomDist, SolidColor,
};
pub use refine::{
    cdmad_step_loss, la_prior, refine_logits, refine_pseudo_label,
    refine_pseudo_label_with_bias, refine_test_predictions, Algo, PriorMode, RefinementRule,
};

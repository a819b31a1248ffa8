//! Minimal dense neural-network core: MLP forward/backward, softmax and
//! cross-entropy, Adam, EMA shadow parameters and a finite-difference
//! gradient checker.

mod adam;
mod ema;
mod gradcheck;
mod loss;
mod model;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use ema::EmaParams;
pub use gradcheck::grad_check;
pub use loss::{cross_entropy, softmax, softmax_ce_grad, LOG_FLOOR};
pub use model::{Activation, Cache, GradStore, MlpModel, RotationCache};

use crate::error::{Error, Result};
use crate::nn::model::MlpModel;
use crate::scalar::Real;

/// Exponential moving average of the model parameters, kept as a full
/// shadow model so it can be evaluated directly.
#[derive(Debug, Clone)]
pub struct EmaParams<T> {
    shadow: MlpModel<T>,
    pub decay: f64,
}

impl<T: Real> EmaParams<T> {
    pub fn new(model: &MlpModel<T>, decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::InvalidConfig(format!("ema decay must be in [0,1): {decay}")));
        }
        Ok(EmaParams {
            shadow: model.clone(),
            decay,
        })
    }

    /// `shadow <- decay*shadow + (1-decay)*params`, elementwise.
    pub fn update(&mut self, model: &MlpModel<T>) -> Result<()> {
        let d = T::from_f64_lossy(self.decay);
        let one_minus = T::one() - d;
        let mut shadow_slices = self.shadow.param_slices_mut();
        let live_slices = model.param_slices();
        if shadow_slices.len() != live_slices.len() {
            return Err(Error::shape(
                format!("{} tensors", shadow_slices.len()),
                format!("{} tensors", live_slices.len()),
            ));
        }
        for (s, l) in shadow_slices.iter_mut().zip(&live_slices) {
            if s.len() != l.len() {
                return Err(Error::shape(format!("{}", s.len()), format!("{}", l.len())));
            }
            for (sv, &lv) in s.iter_mut().zip(l.iter()) {
                *sv = d * *sv + one_minus * lv;
            }
        }
        Ok(())
    }

    pub fn model(&self) -> &MlpModel<T> {
        &self.shadow
    }
}

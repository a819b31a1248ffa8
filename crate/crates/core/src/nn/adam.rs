use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::{GradStore, MlpModel};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1.5e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Per-parameter first and second moments plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    pub t: u64,
    pub config: AdamConfig,
}

impl<T: Real> AdamState<T> {
    pub fn new(model: &MlpModel<T>, config: AdamConfig) -> Self {
        let shapes: Vec<usize> = model.param_slices().iter().map(|s| s.len()).collect();
        AdamState {
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            t: 0,
            config,
        }
    }
}

/// One Adam update with bias correction and decoupled weight decay
/// (`p *= 1 - lr*wd` before the moment update).
pub fn adam_step<T: Real>(
    state: &mut AdamState<T>,
    model: &mut MlpModel<T>,
    grads: &GradStore<T>,
) -> Result<()> {
    let grad_slices = grads.slices();
    let mut param_slices = model.param_slices_mut();
    if grad_slices.len() != param_slices.len() || grad_slices.len() != state.m.len() {
        return Err(Error::shape(
            format!("{} param tensors", param_slices.len()),
            format!("{} grad tensors", grad_slices.len()),
        ));
    }
    for (p, g) in param_slices.iter().zip(&grad_slices) {
        if p.len() != g.len() {
            return Err(Error::shape(format!("{} values", p.len()), format!("{}", g.len())));
        }
    }

    state.t += 1;
    let cfg = state.config;
    let lr = T::from_f64_lossy(cfg.lr);
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let eps = T::from_f64_lossy(cfg.epsilon);
    let decay_mul = T::from_f64_lossy(1.0 - cfg.lr * cfg.weight_decay);
    let bc1 = T::from_f64_lossy(1.0 - cfg.beta1.powi(state.t as i32));
    let bc2 = T::from_f64_lossy(1.0 - cfg.beta2.powi(state.t as i32));

    for (((p, g), m), v) in param_slices
        .iter_mut()
        .zip(&grad_slices)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        for (((pi, &gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
            if cfg.weight_decay != 0.0 {
                *pi = *pi * decay_mul;
            }
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *pi = *pi - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_zero_decay_is_identity() {
        let mut model = MlpModel::<f64>::new(&[2, 4, 3], None, 1).unwrap();
        let before: Vec<f64> = model.param_slices().concat();
        let mut state = AdamState::new(&model, AdamConfig::default());
        let grads = GradStore::zeros_like(&model);
        adam_step(&mut state, &mut model, &grads).unwrap();
        let after: Vec<f64> = model.param_slices().concat();
        assert_eq!(before, after);
    }

    #[test]
    fn first_step_moves_by_about_lr_sign_g() {
        let mut model = MlpModel::<f64>::new(&[1, 2], None, 1).unwrap();
        let before: Vec<f64> = model.param_slices().concat();
        let cfg = AdamConfig {
            lr: 0.01,
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(&model, cfg);
        let mut grads = GradStore::zeros_like(&model);
        grads.layers[0].0.set(0, 0, 3.0);
        grads.layers[0].0.set(0, 1, -7.0);
        adam_step(&mut state, &mut model, &grads).unwrap();
        let after: Vec<f64> = model.param_slices().concat();
        // bias-corrected first step: delta = -lr * g / (|g| + eps') ~ -lr*sign(g)
        assert!((after[0] - before[0] + 0.01).abs() < 1e-6);
        assert!((after[1] - before[1] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn descends_quadratic() {
        // f(w) = w^2, grad = 2w, 10 steps from w=1 strictly decreases |w|
        let mut model = MlpModel {
            layers: vec![crate::nn::model::Layer {
                weight: crate::matrix::Matrix::new(1, 1, vec![1.0f64]).unwrap(),
                bias: vec![0.0],
                activation: crate::nn::Activation::Identity,
            }],
            rotation_head: None,
        };
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(&model, cfg);
        let mut prev = 1.0f64;
        for _ in 0..10 {
            let w = model.layers[0].weight.get(0, 0);
            let mut grads = GradStore::zeros_like(&model);
            grads.layers[0].0.set(0, 0, 2.0 * w);
            adam_step(&mut state, &mut model, &grads).unwrap();
            let next = model.layers[0].weight.get(0, 0).abs();
            assert!(next < prev, "|w| must strictly decrease: {next} vs {prev}");
            prev = next;
        }
    }
}

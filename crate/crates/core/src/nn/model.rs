use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply<T: Real>(self, v: T) -> T {
        match self {
            Activation::Relu => v.max(T::zero()),
            Activation::Identity => v,
        }
    }

    fn derivative<T: Real>(self, preact: T) -> T {
        match self {
            Activation::Relu => {
                if preact > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer<T> {
    /// in_dim x out_dim, row-major.
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct RotationHead<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

/// A small multilayer perceptron: the classifier and its logits, plus an
/// optional rotation-prediction head over the last hidden representation.
#[derive(Debug, Clone)]
pub struct MlpModel<T> {
    pub layers: Vec<Layer<T>>,
    pub rotation_head: Option<RotationHead<T>>,
}

/// Activations cached by a forward pass, sufficient for exact backprop.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    /// Input to each layer (inputs[0] is the network input).
    inputs: Vec<Matrix<T>>,
    /// Pre-activation of each layer.
    preacts: Vec<Matrix<T>>,
}

/// Cache for a rotation-head forward pass: trunk cache plus the hidden
/// representation fed to the head.
#[derive(Debug, Clone)]
pub struct RotationCache<T> {
    trunk: Cache<T>,
    hidden: Matrix<T>,
}

/// Parameter gradients, mirroring the model's shapes.
#[derive(Debug, Clone)]
pub struct GradStore<T> {
    pub layers: Vec<(Matrix<T>, Vec<T>)>,
    pub rotation_head: Option<(Matrix<T>, Vec<T>)>,
}

impl<T: Real> GradStore<T> {
    pub fn zeros_like(model: &MlpModel<T>) -> Self {
        GradStore {
            layers: model
                .layers
                .iter()
                .map(|l| {
                    (
                        Matrix::zeros(l.weight.rows(), l.weight.cols()),
                        vec![T::zero(); l.bias.len()],
                    )
                })
                .collect(),
            rotation_head: model
                .rotation_head
                .as_ref()
                .map(|h| (Matrix::zeros(h.weight.rows(), h.weight.cols()), vec![T::zero(); h.bias.len()])),
        }
    }

    pub fn add_assign(&mut self, other: &GradStore<T>) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape(
                format!("{} layers", self.layers.len()),
                format!("{} layers", other.layers.len()),
            ));
        }
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.add_scaled(ow, T::one())?;
            for (x, &y) in b.iter_mut().zip(ob) {
                *x = *x + y;
            }
        }
        match (&mut self.rotation_head, &other.rotation_head) {
            (Some((w, b)), Some((ow, ob))) => {
                w.add_scaled(ow, T::one())?;
                for (x, &y) in b.iter_mut().zip(ob) {
                    *x = *x + y;
                }
            }
            (_, None) => {}
            (None, Some(_)) => {
                return Err(Error::InvalidInput(
                    "cannot accumulate rotation-head gradients into a store without one".into(),
                ))
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: T) {
        for (w, b) in &mut self.layers {
            w.scale(alpha);
            for x in b.iter_mut() {
                *x = *x * alpha;
            }
        }
        if let Some((w, b)) = &mut self.rotation_head {
            w.scale(alpha);
            for x in b.iter_mut() {
                *x = *x * alpha;
            }
        }
    }

    /// Parameter-tensor slices in canonical order (matching
    /// [`MlpModel::param_slices`]).
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.push(w.data());
            out.push(b.as_slice());
        }
        if let Some((w, b)) = &self.rotation_head {
            out.push(w.data());
            out.push(b.as_slice());
        }
        out
    }
}

impl<T: Real> MlpModel<T> {
    /// He-initialized MLP with relu hidden layers and an identity output
    /// layer. `dims` runs input -> hidden... -> output.
    pub fn new(dims: &[usize], rotation_degrees: Option<usize>, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidConfig("need at least input and output dims".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for k in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[k], dims[k + 1]);
            let activation = if k + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Layer {
                weight: he_init(fan_in, fan_out, &mut rng),
                bias: vec![T::zero(); fan_out],
                activation,
            });
        }
        let rotation_head = rotation_degrees
            .map(|degrees| {
                let hidden = dims[dims.len() - 2];
                RotationHead {
                    weight: he_init(hidden, degrees, &mut rng),
                    bias: vec![T::zero(); degrees],
                }
            });
        let model = MlpModel { layers, rotation_head };
        model.check_chain()?;
        Ok(model)
    }

    fn check_chain(&self) -> Result<()> {
        for pair in self.layers.windows(2) {
            if pair[0].weight.cols() != pair[1].weight.rows() {
                return Err(Error::shape(
                    format!("layer output dim {}", pair[0].weight.cols()),
                    format!("next layer input dim {}", pair[1].weight.rows()),
                ));
            }
        }
        if let Some(h) = &self.rotation_head {
            let hidden = self.layers[self.layers.len() - 1].weight.rows();
            if h.weight.rows() != hidden {
                return Err(Error::shape(
                    format!("rotation head input dim {hidden}"),
                    format!("{}", h.weight.rows()),
                ));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.cols()
    }

    /// Forward pass; returns logits and the cache needed for backprop.
    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, Cache<T>)> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                format!("input dim {}", self.input_dim()),
                format!("{} cols", x.cols()),
            ));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            inputs.push(h.clone());
            let mut z = h.matmul(&layer.weight)?;
            for r in 0..z.rows() {
                for (v, &b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v = *v + b;
                }
            }
            preacts.push(z.clone());
            h = z.map(|v| layer.activation.apply(v));
        }
        Ok((h, Cache { inputs, preacts }))
    }

    /// Logits only, cache discarded.
    pub fn logits(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.forward(x)?.0)
    }

    /// Backprop from `dlogits` through all layers.
    pub fn backward(&self, cache: &Cache<T>, dlogits: &Matrix<T>) -> Result<GradStore<T>> {
        self.check_cache(cache)?;
        if dlogits.cols() != self.output_dim() || dlogits.rows() != cache.inputs[0].rows() {
            return Err(Error::StaleCache);
        }
        let mut grads = GradStore::zeros_like(self);
        let last = self.layers.len() - 1;
        let mut upstream = dlogits.clone();
        for k in (0..=last).rev() {
            upstream = self.backward_layer(k, cache, &upstream, &mut grads)?;
        }
        Ok(grads)
    }

    /// Backprop one layer; returns the gradient w.r.t. the layer input.
    fn backward_layer(
        &self,
        k: usize,
        cache: &Cache<T>,
        upstream: &Matrix<T>,
        grads: &mut GradStore<T>,
    ) -> Result<Matrix<T>> {
        let layer = &self.layers[k];
        // dz = da * act'(z)
        let dz = upstream.zip_map(&cache.preacts[k], |da, z| da * layer.activation.derivative(z))?;
        let dw = cache.inputs[k].transpose().matmul(&dz)?;
        grads.layers[k].0.add_scaled(&dw, T::one())?;
        for c in 0..dz.cols() {
            let mut s = T::zero();
            for r in 0..dz.rows() {
                s = s + dz.get(r, c);
            }
            grads.layers[k].1[c] = grads.layers[k].1[c] + s;
        }
        dz.matmul(&layer.weight.transpose())
    }

    fn check_cache(&self, cache: &Cache<T>) -> Result<()> {
        if cache.inputs.len() != self.layers.len() || cache.preacts.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if cache.inputs[k].cols() != layer.weight.rows()
                || cache.preacts[k].cols() != layer.weight.cols()
            {
                return Err(Error::StaleCache);
            }
        }
        Ok(())
    }

    /// Forward pass through the trunk (all layers but the last) and the
    /// rotation head.
    pub fn forward_rotation(&self, x: &Matrix<T>) -> Result<(Matrix<T>, RotationCache<T>)> {
        let head = self
            .rotation_head
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("model has no rotation head".into()))?;
        let mut inputs = Vec::new();
        let mut preacts = Vec::new();
        let mut h = x.clone();
        for layer in &self.layers[..self.layers.len() - 1] {
            inputs.push(h.clone());
            let mut z = h.matmul(&layer.weight)?;
            for r in 0..z.rows() {
                for (v, &b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v = *v + b;
                }
            }
            preacts.push(z.clone());
            h = z.map(|v| layer.activation.apply(v));
        }
        let mut logits = h.matmul(&head.weight)?;
        for r in 0..logits.rows() {
            for (v, &b) in logits.row_mut(r).iter_mut().zip(&head.bias) {
                *v = *v + b;
            }
        }
        Ok((
            logits,
            RotationCache {
                trunk: Cache { inputs, preacts },
                hidden: h,
            },
        ))
    }

    /// Backprop from rotation-head logits through the head and the shared
    /// trunk. Final classifier layer gradients stay zero.
    pub fn backward_rotation(
        &self,
        cache: &RotationCache<T>,
        dlogits: &Matrix<T>,
    ) -> Result<GradStore<T>> {
        let head = self
            .rotation_head
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("model has no rotation head".into()))?;
        let mut grads = GradStore::zeros_like(self);
        let dw = cache.hidden.transpose().matmul(dlogits)?;
        let (gw, gb) = grads.rotation_head.as_mut().expect("head grads allocated");
        gw.add_scaled(&dw, T::one())?;
        for c in 0..dlogits.cols() {
            let mut s = T::zero();
            for r in 0..dlogits.rows() {
                s = s + dlogits.get(r, c);
            }
            gb[c] = gb[c] + s;
        }
        let mut upstream = dlogits.matmul(&head.weight.transpose())?;
        for k in (0..self.layers.len() - 1).rev() {
            upstream = self.backward_layer(k, &cache.trunk, &upstream, &mut grads)?;
        }
        Ok(grads)
    }

    /// Parameter-tensor slices in canonical order: (W, b) per layer, then
    /// the rotation head if present.
    pub fn param_slices(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.weight.data());
            out.push(l.bias.as_slice());
        }
        if let Some(h) = &self.rotation_head {
            out.push(h.weight.data());
            out.push(h.bias.as_slice());
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.weight.data_mut());
            out.push(l.bias.as_mut_slice());
        }
        if let Some(h) = &mut self.rotation_head {
            out.push(h.weight.data_mut());
            out.push(h.bias.as_mut_slice());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }
}

fn he_init<T: Real>(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let mut m = Matrix::zeros(fan_in, fan_out);
    for v in m.data_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = T::from_f64_lossy(z * std);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{softmax, softmax_ce_grad};

    fn identity_model(dim: usize) -> MlpModel<f64> {
        let mut weight = Matrix::zeros(dim, dim);
        for i in 0..dim {
            weight.set(i, i, 1.0);
        }
        MlpModel {
            layers: vec![Layer {
                weight,
                bias: vec![0.0; dim],
                activation: Activation::Identity,
            }],
            rotation_head: None,
        }
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let model = identity_model(3);
        let x = Matrix::new(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.0]).unwrap();
        let (logits, _) = model.forward(&x).unwrap();
        assert_eq!(logits, x);
    }

    #[test]
    fn zero_weights_emit_bias() {
        let model = MlpModel {
            layers: vec![Layer {
                weight: Matrix::zeros(2, 3),
                bias: vec![0.1, 0.2, 0.3],
                activation: Activation::Identity,
            }],
            rotation_head: None,
        };
        let x = Matrix::new(2, 2, vec![5.0, -4.0, 1.0, 2.0]).unwrap();
        let (logits, _) = model.forward(&x).unwrap();
        for row in logits.iter_rows() {
            assert_eq!(row, &[0.1, 0.2, 0.3]);
        }
    }

    #[test]
    fn two_layer_forward_matches_straightline_recomputation() {
        let model = MlpModel::<f64>::new(&[3, 4, 2], None, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = {
            let mut m = Matrix::zeros(5, 3);
            for v in m.data_mut() {
                *v = rng.sample::<f64, _>(StandardNormal);
            }
            m
        };
        let (logits, _) = model.forward(&x).unwrap();
        // straight-line recomputation
        for r in 0..x.rows() {
            let mut h: Vec<f64> = x.row(r).to_vec();
            for layer in &model.layers {
                let mut z = layer.bias.clone();
                for (i, &hi) in h.iter().enumerate() {
                    for j in 0..layer.weight.cols() {
                        z[j] += hi * layer.weight.get(i, j);
                    }
                }
                h = z
                    .into_iter()
                    .map(|v| layer.activation.apply(v))
                    .collect();
            }
            for (j, &v) in h.iter().enumerate() {
                assert!((logits.get(r, j) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_dim_mismatch() {
        let model = MlpModel::<f64>::new(&[3, 4, 2], None, 0).unwrap();
        let x = Matrix::<f64>::zeros(1, 5);
        assert!(model.forward(&x).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let model = MlpModel::<f64>::new(&[3, 4, 2], None, 0).unwrap();
        let x = Matrix::<f64>::filled(4, 3, 0.5);
        let (_, cache) = model.forward(&x).unwrap();
        let grads = model.backward(&cache, &Matrix::zeros(4, 2)).unwrap();
        for s in grads.slices() {
            assert!(s.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn linear_layer_grad_is_xt_dlogits() {
        let model = MlpModel::<f64> {
            layers: vec![Layer {
                weight: Matrix::new(2, 2, vec![0.3, -0.1, 0.7, 0.2]).unwrap(),
                bias: vec![0.0, 0.0],
                activation: Activation::Identity,
            }],
            rotation_head: None,
        };
        let x = Matrix::new(3, 2, vec![1.0, 2.0, -1.0, 0.5, 0.0, 3.0]).unwrap();
        let (_, cache) = model.forward(&x).unwrap();
        let d = Matrix::new(3, 2, vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]).unwrap();
        let grads = model.backward(&cache, &d).unwrap();
        let expected = x.transpose().matmul(&d).unwrap();
        for (a, b) in grads.layers[0].0.data().iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-12f64);
        }
    }

    #[test]
    fn stale_cache_rejected() {
        let model = MlpModel::<f64>::new(&[3, 4, 2], None, 0).unwrap();
        let other = MlpModel::<f64>::new(&[3, 5, 2], None, 0).unwrap();
        let x = Matrix::<f64>::filled(2, 3, 1.0);
        let (_, cache) = other.forward(&x).unwrap();
        assert!(model.backward(&cache, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn softmax_argmax_matches_logit_argmax() {
        let model = MlpModel::<f64>::new(&[2, 8, 4], None, 42).unwrap();
        let x = Matrix::new(3, 2, vec![0.1, -0.7, 2.0, 1.0, -1.5, 0.2]).unwrap();
        let (logits, _) = model.forward(&x).unwrap();
        let probs = softmax(&logits).unwrap();
        for (lr, pr) in logits.iter_rows().zip(probs.iter_rows()) {
            let am = |s: &[f64]| {
                s.iter()
                    .enumerate()
                    .fold((0usize, f64::NEG_INFINITY), |acc, (i, &v)| {
                        if v > acc.1 {
                            (i, v)
                        } else {
                            acc
                        }
                    })
                    .0
            };
            assert_eq!(am(lr), am(pr));
        }
    }

    #[test]
    fn rotation_backward_leaves_final_layer_untouched() {
        let model = MlpModel::<f64>::new(&[4, 6, 3], Some(4), 9).unwrap();
        let x = Matrix::<f64>::filled(2, 4, 0.3);
        let (rot_logits, cache) = model.forward_rotation(&x).unwrap();
        let probs = softmax(&rot_logits).unwrap();
        let mut targets = Matrix::zeros(2, 4);
        targets.set(0, 1, 1.0);
        targets.set(1, 2, 1.0);
        let d = softmax_ce_grad(&probs, &targets).unwrap();
        let grads = model.backward_rotation(&cache, &d).unwrap();
        let last = grads.layers.len() - 1;
        assert!(grads.layers[last].0.data().iter().all(|&v| v == 0.0));
        assert!(grads
            .rotation_head
            .as_ref()
            .unwrap()
            .0
            .data()
            .iter()
            .any(|&v| v != 0.0));
    }
}

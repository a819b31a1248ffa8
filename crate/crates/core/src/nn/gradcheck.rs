use crate::error::Result;
use crate::matrix::Matrix;
use crate::nn::loss::{cross_entropy, softmax, softmax_ce_grad};
use crate::nn::model::MlpModel;
use crate::scalar::Real;

/// Compares analytic softmax/cross-entropy gradients against central finite
/// differences. Returns the max over parameters of
/// `|analytic - cd| / max(|analytic|, |cd|, 1e-8)`.
pub fn grad_check<T: Real>(
    model: &MlpModel<T>,
    x: &Matrix<T>,
    targets: &Matrix<T>,
    eps: f64,
) -> Result<f64> {
    let (logits, cache) = model.forward(x)?;
    let probs = softmax(&logits)?;
    let dlogits = softmax_ce_grad(&probs, targets)?;
    let analytic = model.backward(&cache, &dlogits)?;

    let mut work = model.clone();
    let n_tensors = work.param_slices().len();
    let mut max_rel = 0.0f64;
    let eps_t = T::from_f64_lossy(eps);

    for ti in 0..n_tensors {
        let len = work.param_slices()[ti].len();
        for i in 0..len {
            let orig = work.param_slices()[ti][i];

            work.param_slices_mut()[ti][i] = orig + eps_t;
            let lp = loss_of(&work, x, targets)?;
            work.param_slices_mut()[ti][i] = orig - eps_t;
            let lm = loss_of(&work, x, targets)?;
            work.param_slices_mut()[ti][i] = orig;

            let cd = (lp - lm) / (2.0 * eps);
            let a = analytic.slices()[ti][i].to_f64_lossy();
            let rel = (a - cd).abs() / a.abs().max(cd.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

fn loss_of<T: Real>(model: &MlpModel<T>, x: &Matrix<T>, targets: &Matrix<T>) -> Result<f64> {
    let logits = model.logits(x)?;
    let probs = softmax(&logits)?;
    Ok(cross_entropy(&probs, targets)?.to_f64_lossy())
}

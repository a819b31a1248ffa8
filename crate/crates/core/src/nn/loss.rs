use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Clamp floor applied inside the log of the cross-entropy so saturated
/// probabilities never produce -inf.
pub const LOG_FLOOR: f64 = 1e-12;

/// Row-wise softmax with max-subtraction for stability.
pub fn softmax<T: Real>(logits: &Matrix<T>) -> Result<Matrix<T>> {
    if !logits.is_finite() {
        return Err(Error::InvalidInput("softmax input contains NaN/Inf".into()));
    }
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for (i, row) in logits.iter_rows().enumerate() {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let out_row = out.row_mut(i);
        let mut sum = T::zero();
        for (o, &v) in out_row.iter_mut().zip(row) {
            let e = (v - max).exp();
            *o = e;
            sum = sum + e;
        }
        for o in out_row.iter_mut() {
            *o = *o / sum;
        }
    }
    Ok(out)
}

fn check_distribution_rows<T: Real>(m: &Matrix<T>, what: &str) -> Result<()> {
    let tol = T::from_f64_lossy(1e-6);
    for row in m.iter_rows() {
        let sum: T = row.iter().cloned().sum();
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "{what} row does not sum to 1 (sum = {sum})"
            )));
        }
    }
    Ok(())
}

/// Mean over rows of `-sum_c target * log(pred + floor)`.
pub fn cross_entropy<T: Real>(pred_probs: &Matrix<T>, target_probs: &Matrix<T>) -> Result<T> {
    if !pred_probs.same_shape(target_probs) {
        return Err(Error::shape(pred_probs.shape_str(), target_probs.shape_str()));
    }
    check_distribution_rows(pred_probs, "prediction")?;
    check_distribution_rows(target_probs, "target")?;
    let floor = T::from_f64_lossy(LOG_FLOOR);
    let mut total = T::zero();
    for (p_row, t_row) in pred_probs.iter_rows().zip(target_probs.iter_rows()) {
        for (&p, &t) in p_row.iter().zip(t_row) {
            if t != T::zero() {
                total = total - t * p.max(floor).ln();
            }
        }
    }
    Ok(total / T::from_usize_lossy(pred_probs.rows()))
}

/// Gradient of the mean cross-entropy w.r.t. the logits when the predictions
/// are produced by softmax: `(pred - target) / batch`.
pub fn softmax_ce_grad<T: Real>(pred_probs: &Matrix<T>, target_probs: &Matrix<T>) -> Result<Matrix<T>> {
    if !pred_probs.same_shape(target_probs) {
        return Err(Error::shape(pred_probs.shape_str(), target_probs.shape_str()));
    }
    let inv_batch = T::one() / T::from_usize_lossy(pred_probs.rows());
    pred_probs.zip_map(target_probs, |p, t| (p - t) * inv_batch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetry() {
        let m = Matrix::row_vector(&[0.0f64, 0.0, 0.0]);
        let s = softmax(&m).unwrap();
        for &v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax(&Matrix::row_vector(&[1.0f64, 2.0, 3.0])).unwrap();
        let b = softmax(&Matrix::row_vector(&[11.0f64, 12.0, 13.0])).unwrap();
        for (&x, &y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_hand_value() {
        let s = softmax(&Matrix::row_vector(&[0.0f64, 3.0f64.ln()])).unwrap();
        assert!((s.get(0, 0) - 0.25).abs() < 1e-12);
        assert!((s.get(0, 1) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_nonfinite() {
        let m = Matrix::row_vector(&[f64::NAN, 0.0]);
        assert!(softmax(&m).is_err());
    }

    #[test]
    fn ce_zero_on_perfect_onehot() {
        let p = Matrix::row_vector(&[1.0f64, 0.0]);
        let loss = cross_entropy(&p, &p).unwrap();
        assert!(loss.abs() < 1e-9);
    }

    #[test]
    fn ce_ln2_on_even_split() {
        let p = Matrix::row_vector(&[0.5f64, 0.5]);
        let t = Matrix::row_vector(&[1.0f64, 0.0]);
        let loss = cross_entropy(&p, &t).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ce_rejects_shape_mismatch() {
        let p = Matrix::<f64>::zeros(1, 2);
        let t = Matrix::<f64>::zeros(1, 3);
        assert!(cross_entropy(&p, &t).is_err());
    }
}

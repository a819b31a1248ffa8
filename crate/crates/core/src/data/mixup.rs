use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::Mat;

/// Convex combination of two batches with a fixed lambda; targets mix with
/// the same coefficient.
pub fn mixup_with_lambda(
    xa: &Mat,
    ta: &Mat,
    xb: &Mat,
    tb: &Mat,
    lambda: f64,
) -> Result<(Mat, Mat)> {
    if !xa.same_shape(xb) || !ta.same_shape(tb) || xa.rows() != ta.rows() {
        return Err(Error::shape(
            format!("{} / {}", xa.shape_str(), ta.shape_str()),
            format!("{} / {}", xb.shape_str(), tb.shape_str()),
        ));
    }
    let x = xa.zip_map(xb, |a, b| lambda * a + (1.0 - lambda) * b)?;
    let t = ta.zip_map(tb, |a, b| lambda * a + (1.0 - lambda) * b)?;
    Ok((x, t))
}

/// Mixup with `lambda ~ Beta(alpha, alpha)` clamped to `max(lambda, 1-lambda)`
/// so the first batch dominates. Returns the drawn lambda.
pub fn mixup(
    xa: &Mat,
    ta: &Mat,
    xb: &Mat,
    tb: &Mat,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Mat, Mat, f64)> {
    if alpha <= 0.0 {
        return Err(Error::InvalidConfig(format!("mixup alpha must be > 0, got {alpha}")));
    }
    let beta = Beta::new(alpha, alpha)
        .map_err(|e| Error::InvalidConfig(format!("beta distribution: {e}")))?;
    let raw: f64 = beta.sample(rng);
    // guard against degenerate draws at exactly 0/1 under extreme alpha
    let raw = if raw.is_finite() { raw } else { rng.gen::<f64>() };
    let lambda = raw.max(1.0 - raw);
    let (x, t) = mixup_with_lambda(xa, ta, xb, tb, lambda)?;
    Ok((x, t, lambda))
}

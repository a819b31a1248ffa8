use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::nn::{softmax, MlpModel};
use crate::Mat;

/// Window length of the distribution-alignment running mean.
pub const ALIGN_WINDOW: usize = 128;

/// Class-probability predictions for a batch of weakly augmented unlabeled
/// samples. No gradient flows through this path: only the probabilities
/// escape, never the forward cache.
pub fn pseudo_label(model: &MlpModel<f64>, weak_views: &Mat) -> Result<Mat> {
    softmax(&model.logits(weak_views)?)
}

/// One-hot at the row argmax; ties break toward the lowest class index.
pub fn harden_row(q: &[f64]) -> Vec<f64> {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    let mut out = vec![0.0; q.len()];
    out[best] = 1.0;
    out
}

/// Row-wise [`harden_row`] over a batch.
pub fn harden(q: &Mat) -> Mat {
    let rows: Vec<Vec<f64>> = q.iter_rows().map(harden_row).collect();
    Mat::from_rows(&rows).expect("rows share the input width")
}

/// `mask[b] == (max_c q[b,c] >= tau)`; `tau == 0` passes everything and
/// `tau > 1` passes nothing.
pub fn confidence_mask(q: &Mat, tau: f64) -> Vec<bool> {
    q.iter_rows()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max) >= tau)
        .collect()
}

/// Ring buffer of the last [`ALIGN_WINDOW`] batch-mean pseudo-label vectors.
/// The running mean is uniform until the first update.
#[derive(Debug, Clone)]
pub struct AlignState {
    classes: usize,
    window: VecDeque<Vec<f64>>,
}

impl AlignState {
    pub fn new(classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidConfig("AlignState needs classes >= 1".into()));
        }
        Ok(AlignState {
            classes,
            window: VecDeque::with_capacity(ALIGN_WINDOW),
        })
    }

    /// Mean of the buffered batch means; uniform before the first update.
    pub fn running_mean(&self) -> Vec<f64> {
        if self.window.is_empty() {
            return vec![1.0 / self.classes as f64; self.classes];
        }
        let mut mean = vec![0.0; self.classes];
        for entry in &self.window {
            for (m, &v) in mean.iter_mut().zip(entry) {
                *m += v;
            }
        }
        let n = self.window.len() as f64;
        for m in &mut mean {
            *m /= n;
        }
        mean
    }

    pub fn push_batch_mean(&mut self, batch_mean: Vec<f64>) -> Result<()> {
        if batch_mean.len() != self.classes {
            return Err(Error::shape(
                format!("{} classes", self.classes),
                format!("{} entries", batch_mean.len()),
            ));
        }
        if self.window.len() == ALIGN_WINDOW {
            self.window.pop_front();
        }
        self.window.push_back(batch_mean);
        Ok(())
    }
}

/// ReMixMatch distribution alignment: rescale each pseudo-label by the ratio
/// of the labeled class distribution to the running model marginal, then
/// renormalize. The state is updated with the *input* batch mean afterwards.
pub fn distribution_align(q: &Mat, p_labeled: &[f64], state: &mut AlignState) -> Result<Mat> {
    if p_labeled.len() != q.cols() {
        return Err(Error::shape(
            format!("{} classes", q.cols()),
            format!("{} entries", p_labeled.len()),
        ));
    }
    let running = state.running_mean();
    let mut out = Mat::zeros(q.rows(), q.cols());
    for r in 0..q.rows() {
        let row = q.row(r);
        let mut scaled: Vec<f64> = row
            .iter()
            .zip(p_labeled)
            .zip(&running)
            .map(|((&qi, &pl), &rm)| qi * pl / rm.max(1e-8))
            .collect();
        let s: f64 = scaled.iter().sum();
        if s <= 0.0 {
            return Err(Error::InvalidInput(
                "distribution alignment produced a zero row".into(),
            ));
        }
        for v in &mut scaled {
            *v /= s;
        }
        for (c, &v) in scaled.iter().enumerate() {
            out.set(r, c, v);
        }
    }
    // batch mean of the raw predictions, recorded after alignment
    let mut batch_mean = vec![0.0; q.cols()];
    for row in q.iter_rows() {
        for (m, &v) in batch_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut batch_mean {
        *m /= q.rows() as f64;
    }
    state.push_batch_mean(batch_mean)?;
    Ok(out)
}

/// Temperature sharpening: `Normalize(q^(1/T))`. Identity at `T == 1`.
pub fn sharpen(q: &Mat, temperature: f64) -> Result<Mat> {
    if temperature <= 0.0 || temperature > 1.0 {
        return Err(Error::InvalidConfig(format!(
            "sharpening temperature must be in (0, 1], got {temperature}"
        )));
    }
    let inv = 1.0 / temperature;
    let mut out = Mat::zeros(q.rows(), q.cols());
    for r in 0..q.rows() {
        let powed: Vec<f64> = q.row(r).iter().map(|&v| v.max(0.0).powf(inv)).collect();
        let s: f64 = powed.iter().sum();
        if s <= 0.0 {
            return Err(Error::InvalidInput("sharpen saw an all-zero row".into()));
        }
        for (c, &v) in powed.iter().enumerate() {
            out.set(r, c, v / s);
        }
    }
    Ok(out)
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::task::{FamilyKind, TaskSpec};
use crate::error::{Error, Result};
use crate::Mat;

/// Everything downstream code needs to know about a dataset without touching
/// the samples: geometry, realized counts and the normalization transform.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetHeader {
    pub family: FamilyKind,
    pub classes: usize,
    pub dim: usize,
    pub labeled_counts: Vec<usize>,
    pub unlabeled_counts: Vec<usize>,
    pub test_per_class: usize,
    /// Scalar normalization: normalized = (raw - mean) / scale.
    pub mean: f64,
    pub scale: f64,
    /// Largest normalized feature value observed in the training pool.
    pub norm_max: f64,
    pub seed: u64,
}

impl DatasetHeader {
    pub fn normalize(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.scale
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * self.scale + self.mean
    }

    /// Normalized value of raw zero: pad/cutout fill.
    pub fn fill_value(&self) -> f64 {
        self.normalize(0.0)
    }
}

/// Labeled/unlabeled/test splits in normalized coordinates. The true labels
/// of the unlabeled pool are kept out of every training-path accessor; they
/// are reachable only through [`SplitDataset::eval_only_unlabeled_labels`].
#[derive(Debug, Clone)]
pub struct SplitDataset {
    header: DatasetHeader,
    labeled_x: Mat,
    labeled_y: Vec<usize>,
    unlabeled_x: Mat,
    hidden_y: Vec<usize>,
    test_x: Mat,
    test_y: Vec<usize>,
}

impl SplitDataset {
    pub(crate) fn from_parts(
        header: DatasetHeader,
        labeled_x: Mat,
        labeled_y: Vec<usize>,
        unlabeled_x: Mat,
        hidden_y: Vec<usize>,
        test_x: Mat,
        test_y: Vec<usize>,
    ) -> Self {
        SplitDataset {
            header,
            labeled_x,
            labeled_y,
            unlabeled_x,
            hidden_y,
            test_x,
            test_y,
        }
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn labeled(&self) -> (&Mat, &[usize]) {
        (&self.labeled_x, &self.labeled_y)
    }

    /// Training view of the unlabeled pool: inputs only.
    pub fn unlabeled_inputs(&self) -> &Mat {
        &self.unlabeled_x
    }

    /// Hidden ground truth of the unlabeled pool. Evaluation/tracing only;
    /// never feed this into a training loss.
    pub fn eval_only_unlabeled_labels(&self) -> &[usize] {
        &self.hidden_y
    }

    pub fn test(&self) -> (&Mat, &[usize]) {
        (&self.test_x, &self.test_y)
    }

    /// Empirical class distribution of the labeled set.
    pub fn labeled_class_distribution(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.header.classes];
        for &y in &self.labeled_y {
            counts[y] += 1;
        }
        let total = self.labeled_y.len() as f64;
        counts.iter().map(|&c| c as f64 / total).collect()
    }
}

/// Draw the three splits i.i.d. from the task's class conditionals, then
/// normalize to scalar zero mean / unit scale computed on the training pool.
/// Deterministic given (task, counts, seed); labeled, unlabeled and test
/// draws use disjoint seed streams.
pub fn synthesize(
    task: &TaskSpec,
    labeled_counts: &[usize],
    unlabeled_counts: &[usize],
    test_per_class: usize,
    seed: u64,
) -> Result<SplitDataset> {
    if labeled_counts.len() != task.classes || unlabeled_counts.len() != task.classes {
        return Err(Error::InvalidConfig(format!(
            "count vectors must have length {}",
            task.classes
        )));
    }
    let dim = task.dim();
    let draw = |counts: &[usize], stream: u64| -> (Vec<f64>, Vec<usize>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (class, &n) in counts.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(super::mix_seed(
                seed,
                stream.wrapping_mul(0x1000) + class as u64,
            ));
            for _ in 0..n {
                xs.extend(task.sample_raw(class, &mut rng));
                ys.push(class);
            }
        }
        (xs, ys)
    };

    let (lx, ly) = draw(labeled_counts, 1);
    let (ux, uy) = draw(unlabeled_counts, 2);
    let test_counts = vec![test_per_class; task.classes];
    let (tx, ty) = draw(&test_counts, 3);

    // scalar normalization from the training pool
    let n_train = (lx.len() + ux.len()) as f64;
    let mean = (lx.iter().sum::<f64>() + ux.iter().sum::<f64>()) / n_train;
    let var = (lx.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        + ux.iter().map(|v| (v - mean).powi(2)).sum::<f64>())
        / n_train;
    let scale = var.sqrt().max(1e-12);

    let norm = |raw: &[f64]| -> Vec<f64> { raw.iter().map(|&v| (v - mean) / scale).collect() };
    let lxn = norm(&lx);
    let uxn = norm(&ux);
    let txn = norm(&tx);
    let norm_max = lxn
        .iter()
        .chain(&uxn)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    let header = DatasetHeader {
        family: task.kind(),
        classes: task.classes,
        dim,
        labeled_counts: labeled_counts.to_vec(),
        unlabeled_counts: unlabeled_counts.to_vec(),
        test_per_class,
        mean,
        scale,
        norm_max,
        seed,
    };
    Ok(SplitDataset::from_parts(
        header,
        Mat::new(ly.len(), dim, lxn)?,
        ly,
        Mat::new(uy.len(), dim, uxn)?,
        uy,
        Mat::new(ty.len(), dim, txn)?,
        ty,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_task() -> TaskSpec {
        TaskSpec::gaussian_ring(3, 2.0, 1.0, 7).unwrap()
    }

    #[test]
    fn determinism() {
        let t = small_task();
        let a = synthesize(&t, &[30, 20, 10], &[40, 30, 20], 50, 99).unwrap();
        let b = synthesize(&t, &[30, 20, 10], &[40, 30, 20], 50, 99).unwrap();
        assert_eq!(a.labeled().0.data(), b.labeled().0.data());
        assert_eq!(a.unlabeled_inputs().data(), b.unlabeled_inputs().data());
        assert_eq!(a.test().0.data(), b.test().0.data());
        assert_eq!(a.header(), b.header());
    }

    #[test]
    fn test_split_balanced() {
        let t = small_task();
        let ds = synthesize(&t, &[10, 10, 10], &[10, 10, 10], 200, 1).unwrap();
        let (tx, ty) = ds.test();
        assert_eq!(tx.rows(), 600);
        for c in 0..3 {
            assert_eq!(ty.iter().filter(|&&y| y == c).count(), 200);
        }
    }

    #[test]
    fn empirical_means_close_to_spec() {
        let t = small_task();
        let n = 10_000;
        let ds = synthesize(&t, &[n, 3, 3], &[3, 3, 3], 5, 42).unwrap();
        let (lx, ly) = ds.labeled();
        let h = ds.header();
        let mut sum = [0.0f64; 2];
        let mut count = 0.0;
        for (row, &y) in lx.iter_rows().zip(ly) {
            if y == 0 {
                sum[0] += h.denormalize(row[0]);
                sum[1] += h.denormalize(row[1]);
                count += 1.0;
            }
        }
        let spec_mean = t.gaussian_means().unwrap()[0];
        // 3 sigma / sqrt(n) with sigma = 1
        let tol = 3.0 / (n as f64).sqrt();
        assert!((sum[0] / count - spec_mean[0]).abs() < tol);
        assert!((sum[1] / count - spec_mean[1]).abs() < tol);
    }

    #[test]
    fn labeled_and_unlabeled_draws_disjoint() {
        let t = small_task();
        let ds = synthesize(&t, &[20, 20, 20], &[20, 20, 20], 5, 3).unwrap();
        // same counts, same seed, but different streams: first rows differ
        assert_ne!(ds.labeled().0.row(0), ds.unlabeled_inputs().row(0));
    }
}

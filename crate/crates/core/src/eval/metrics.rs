use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw prediction counts; entry `(i, j)` is the number of samples of true
/// class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, true_class: usize, pred_class: usize) -> usize {
        self.counts[true_class * self.classes + pred_class]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, true_class: usize) -> usize {
        (0..self.classes).map(|j| self.count(true_class, j)).sum()
    }

    /// Per-class accuracy; errors when any class has no test samples.
    pub fn per_class_acc(&self) -> Result<Vec<f64>> {
        (0..self.classes)
            .map(|i| {
                let n = self.row_sum(i);
                if n == 0 {
                    Err(Error::InvalidInput(format!("class {i} has no samples")))
                } else {
                    Ok(self.count(i, i) as f64 / n as f64)
                }
            })
            .collect()
    }

    /// Row-normalized proportions, for text/CSV dumps.
    pub fn proportions(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.classes)
            .map(|i| {
                let n = self.row_sum(i);
                if n == 0 {
                    return Err(Error::InvalidInput(format!("class {i} has no samples")));
                }
                Ok((0..self.classes)
                    .map(|j| self.count(i, j) as f64 / n as f64)
                    .collect())
            })
            .collect()
    }

    /// Plain-text grid of counts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.classes {
            for j in 0..self.classes {
                if j > 0 {
                    out.push(' ');
                }
                out.push_str(&format!("{:6}", self.count(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::shape(
            format!("{} labels", labels.len()),
            format!("{} predictions", preds.len()),
        ));
    }
    let mut counts = vec![0usize; classes * classes];
    for (&p, &y) in preds.iter().zip(labels) {
        if p >= classes || y >= classes {
            return Err(Error::InvalidInput(format!(
                "label/prediction ({y}, {p}) out of range for {classes} classes"
            )));
        }
        counts[y * classes + p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

/// Balanced accuracy: mean per-class accuracy.
pub fn bacc(conf: &ConfusionMatrix) -> Result<f64> {
    let acc = conf.per_class_acc()?;
    Ok(acc.iter().sum::<f64>() / acc.len() as f64)
}

/// Geometric mean of per-class accuracies; exactly 0 when any class is
/// entirely missed (no smoothing epsilon).
pub fn gm(conf: &ConfusionMatrix) -> Result<f64> {
    let acc = conf.per_class_acc()?;
    if acc.iter().any(|&a| a == 0.0) {
        return Ok(0.0);
    }
    let log_mean = acc.iter().map(|a| a.ln()).sum::<f64>() / acc.len() as f64;
    Ok(log_mean.exp())
}

/// Balanced error rate: `1 - bacc`.
pub fn ber(conf: &ConfusionMatrix) -> Result<f64> {
    Ok(1.0 - bacc(conf)?)
}

/// Default many/medium/few boundaries: the 3/4/3 split at C=10, proportional
/// otherwise.
pub fn default_group_boundaries(classes: usize) -> (usize, usize) {
    if classes == 10 {
        return (3, 7);
    }
    let b1 = ((classes as f64 * 0.3).round() as usize).max(1);
    let b2 = ((classes as f64 * 0.7).round() as usize).min(classes - 1).max(b1 + 1);
    (b1, b2.min(classes - 1))
}

/// Mean per-class accuracy within many `[0, b1)`, medium `[b1, b2)` and few
/// `[b2, C)` groups.
pub fn group_accuracies(
    conf: &ConfusionMatrix,
    boundaries: (usize, usize),
) -> Result<(f64, f64, f64)> {
    let (b1, b2) = boundaries;
    let c = conf.classes();
    if b1 == 0 || b1 >= b2 || b2 >= c {
        return Err(Error::InvalidConfig(format!(
            "boundaries ({b1}, {b2}) do not partition 0..{c}"
        )));
    }
    let acc = conf.per_class_acc()?;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok((mean(&acc[..b1]), mean(&acc[b1..b2]), mean(&acc[b2..])))
}

/// One evaluated run (or epoch) worth of metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub bacc: f64,
    pub gm: f64,
    pub ber: f64,
    pub per_class_acc: Vec<f64>,
    pub acc_many: f64,
    pub acc_medium: f64,
    pub acc_few: f64,
    pub seed: u64,
    pub epoch: usize,
    pub algo: String,
    pub refine: String,
    pub probe: String,
}

impl MetricsRecord {
    pub fn from_confusion(
        conf: &ConfusionMatrix,
        seed: u64,
        epoch: usize,
        algo: &str,
        refine: &str,
        probe: &str,
    ) -> Result<Self> {
        let (many, medium, few) =
            group_accuracies(conf, default_group_boundaries(conf.classes()))?;
        Ok(MetricsRecord {
            bacc: bacc(conf)?,
            gm: gm(conf)?,
            ber: ber(conf)?,
            per_class_acc: conf.per_class_acc()?,
            acc_many: many,
            acc_medium: medium,
            acc_few: few,
            seed,
            epoch,
            algo: algo.to_string(),
            refine: refine.to_string(),
            probe: probe.to_string(),
        })
    }
}

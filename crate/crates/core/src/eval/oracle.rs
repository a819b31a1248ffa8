use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FamilyKind, TaskSpec};
use crate::error::{Error, Result};

/// Which risk the oracle minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleTarget {
    /// `argmax_y p(x|y)`: minimizes the balanced error rate.
    Balanced,
    /// `argmax_y P(y) p(x|y)`: minimizes the ordinary error under the prior.
    PriorWeighted,
}

/// Closed-form Bayes classifier over a gaussian2d task.
#[derive(Debug, Clone)]
pub struct OracleClassifier {
    task: TaskSpec,
    log_priors: Vec<f64>,
    target: OracleTarget,
}

impl OracleClassifier {
    pub fn new(task: &TaskSpec, priors: &[f64], target: OracleTarget) -> Result<Self> {
        if task.kind() != FamilyKind::Gaussian2d {
            return Err(Error::UnsupportedFamily("bayes oracle needs gaussian2d"));
        }
        if priors.len() != task.classes {
            return Err(Error::shape(
                format!("{} classes", task.classes),
                format!("{} priors", priors.len()),
            ));
        }
        if priors.iter().any(|&p| p <= 0.0) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput("priors must be a positive distribution".into()));
        }
        Ok(OracleClassifier {
            task: task.clone(),
            log_priors: priors.iter().map(|p| p.ln()).collect(),
            target: target,
        })
    }

    pub fn target(&self) -> OracleTarget {
        self.target
    }

    /// Decide a single raw-space point by direct density evaluation.
    pub fn classify(&self, x_raw: &[f64]) -> Result<usize> {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..self.task.classes {
            let mut score = self.task.log_density(c, x_raw)?;
            if self.target == OracleTarget::PriorWeighted {
                score += self.log_priors[c];
            }
            if score > best_score {
                best_score = score;
                best = c;
            }
        }
        Ok(best)
    }

    /// Decisions over a regular grid covering `[lo, hi]^2`.
    pub fn decision_grid(&self, lo: f64, hi: f64, n: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let y = lo + (hi - lo) * j as f64 / (n - 1) as f64;
                out.push(self.classify(&[x, y])?);
            }
        }
        Ok(out)
    }

    /// Monte Carlo BER on a balanced i.i.d. sample drawn from the task.
    pub fn oracle_ber(&self, samples_per_class: usize, seed: u64) -> Result<f64> {
        let mut err_sum = 0.0;
        for c in 0..self.task.classes {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
            let mut wrong = 0usize;
            for _ in 0..samples_per_class {
                let x = self.task.sample_raw(c, &mut rng);
                if self.classify(&x)? != c {
                    wrong += 1;
                }
            }
            err_sum += wrong as f64 / samples_per_class as f64;
        }
        Ok(err_sum / self.task.classes as f64)
    }
}

/// Convenience wrapper matching the operation shape: build the oracle and
/// estimate its BER on a balanced sample of at least 1e5 points total.
pub fn bayes_oracle(
    task: &TaskSpec,
    priors: &[f64],
    target: OracleTarget,
    seed: u64,
) -> Result<(OracleClassifier, f64)> {
    let oracle = OracleClassifier::new(task, priors, target)?;
    let per_class = (100_000usize).div_ceil(task.classes);
    let ber = oracle.oracle_ber(per_class, seed)?;
    Ok((oracle, ber))
}

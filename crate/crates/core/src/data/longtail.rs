use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    Labeled,
    Unlabeled,
}

/// Long-tail profile for one dataset: head counts and imbalance ratios for
/// the labeled and unlabeled pools.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LongTailSpec {
    pub classes: usize,
    /// Head labeled count N1.
    pub n1: usize,
    pub gamma_l: f64,
    /// Head unlabeled count M1.
    pub m1: usize,
    pub gamma_u: f64,
    /// Whether algorithms are allowed to see gamma_u / unlabeled counts.
    pub gamma_u_known: bool,
    /// Reverse the unlabeled tail relative to the labeled one.
    pub reversed: bool,
}

impl LongTailSpec {
    pub fn counts(&self, which: Pool) -> Result<Vec<usize>> {
        match which {
            Pool::Labeled => longtail_counts(self.n1, self.gamma_l, self.classes, false),
            Pool::Unlabeled => longtail_counts(self.m1, self.gamma_u, self.classes, self.reversed),
        }
    }
}

/// Exponential long-tail profile: `count_k = head * (1/gamma)^((k-1)/(C-1))`,
/// rounded to nearest with floor 1. `reversed` flips the vector.
pub fn longtail_counts(head: usize, gamma: f64, classes: usize, reversed: bool) -> Result<Vec<usize>> {
    if gamma < 1.0 {
        return Err(Error::InvalidConfig(format!("gamma must be >= 1, got {gamma}")));
    }
    if head < classes {
        return Err(Error::InvalidConfig(format!(
            "head count {head} < class count {classes}: some classes would be empty"
        )));
    }
    let c = classes as f64;
    let mut counts: Vec<usize> = (0..classes)
        .map(|k| {
            let frac = if classes == 1 { 0.0 } else { k as f64 / (c - 1.0) };
            let raw = head as f64 * (1.0 / gamma).powf(frac);
            (raw.round() as usize).max(1)
        })
        .collect();
    if reversed {
        counts.reverse();
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_count_at_gamma_100() {
        let counts = longtail_counts(1500, 100.0, 10, false).unwrap();
        assert_eq!(counts[0], 1500);
        assert_eq!(counts[9], 15);
    }

    #[test]
    fn flat_at_gamma_1() {
        let counts = longtail_counts(1500, 1.0, 10, false).unwrap();
        assert!(counts.iter().all(|&c| c == 1500));
    }

    #[test]
    fn reversed_flips() {
        let counts = longtail_counts(1500, 100.0, 10, true).unwrap();
        assert_eq!(counts[0], 15);
        assert_eq!(counts[9], 1500);
    }

    #[test]
    fn small_head_rejected() {
        assert!(longtail_counts(5, 10.0, 10, false).is_err());
    }

    #[test]
    fn monotone_and_realized_gamma_close() {
        for &gamma in &[1.0, 10.0, 20.0, 50.0, 100.0, 150.0] {
            let counts = longtail_counts(1500, gamma, 10, false).unwrap();
            for w in counts.windows(2) {
                assert!(w[0] >= w[1]);
            }
            let realized = counts[0] as f64 / counts[9] as f64;
            assert!(
                (realized - gamma).abs() / gamma <= 0.05,
                "gamma {gamma} realized {realized}"
            );
        }
    }
}

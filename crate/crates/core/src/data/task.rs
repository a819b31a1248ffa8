use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Icons are 8x8 single-channel images flattened to 64 features.
pub const ICON_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Gaussian2d,
    Icon8x8,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gaussian2d => "gaussian2d",
            FamilyKind::Icon8x8 => "icon8x8",
        }
    }
}

#[derive(Debug, Clone)]
pub enum TaskFamily {
    Gaussian2d {
        means: Vec<[f64; 2]>,
        covs: Vec<[[f64; 2]; 2]>,
    },
    Icon8x8 {
        glyphs: Vec<Vec<f64>>,
        deformation: f64,
    },
}

/// Generative description of a classification task. Both families expose
/// i.i.d. per-class sampling; gaussian2d additionally has closed-form
/// class-conditional densities.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub classes: usize,
    pub family: TaskFamily,
    pub seed: u64,
}

impl TaskSpec {
    /// Gaussian classes with isotropic covariance, means equally spaced on a
    /// circle of the given radius.
    pub fn gaussian_ring(classes: usize, radius: f64, sigma: f64, seed: u64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidConfig("need at least 2 classes".into()));
        }
        let means = (0..classes)
            .map(|c| {
                let angle = 2.0 * std::f64::consts::PI * c as f64 / classes as f64;
                [radius * angle.cos(), radius * angle.sin()]
            })
            .collect();
        let covs = vec![[[sigma * sigma, 0.0], [0.0, sigma * sigma]]; classes];
        Ok(TaskSpec {
            classes,
            family: TaskFamily::Gaussian2d { means, covs },
            seed,
        })
    }

    pub fn gaussian_custom(means: Vec<[f64; 2]>, covs: Vec<[[f64; 2]; 2]>, seed: u64) -> Result<Self> {
        if means.len() < 2 || means.len() != covs.len() {
            return Err(Error::InvalidConfig(
                "means and covariances must agree and cover >= 2 classes".into(),
            ));
        }
        Ok(TaskSpec {
            classes: means.len(),
            family: TaskFamily::Gaussian2d { means, covs },
            seed,
        })
    }

    /// 8x8 glyph classes: a deterministic base pattern per class plus
    /// additive deformation noise at sampling time.
    pub fn icons(classes: usize, deformation: f64, seed: u64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidConfig("need at least 2 classes".into()));
        }
        let glyphs = (0..classes)
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(super::mix_seed(seed, 0xA11C_E000 + c as u64));
                // blocky binary pattern, lightly smoothed so classes overlap
                let mut g = vec![0.0f64; ICON_SIDE * ICON_SIDE];
                for v in g.iter_mut() {
                    *v = if rng.gen_bool(0.4) { 1.0 } else { 0.0 };
                }
                let mut smooth = g.clone();
                for r in 0..ICON_SIDE {
                    for col in 0..ICON_SIDE {
                        let mut acc = 0.0;
                        let mut n = 0.0;
                        for dr in -1i32..=1 {
                            for dc in -1i32..=1 {
                                let rr = r as i32 + dr;
                                let cc = col as i32 + dc;
                                if rr >= 0 && rr < ICON_SIDE as i32 && cc >= 0 && cc < ICON_SIDE as i32 {
                                    acc += g[rr as usize * ICON_SIDE + cc as usize];
                                    n += 1.0;
                                }
                            }
                        }
                        smooth[r * ICON_SIDE + col] = acc / n;
                    }
                }
                smooth
            })
            .collect();
        Ok(TaskSpec {
            classes,
            family: TaskFamily::Icon8x8 { glyphs, deformation },
            seed,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        match self.family {
            TaskFamily::Gaussian2d { .. } => FamilyKind::Gaussian2d,
            TaskFamily::Icon8x8 { .. } => FamilyKind::Icon8x8,
        }
    }

    pub fn dim(&self) -> usize {
        match self.family {
            TaskFamily::Gaussian2d { .. } => 2,
            TaskFamily::Icon8x8 { .. } => ICON_SIDE * ICON_SIDE,
        }
    }

    /// Draw one raw (unnormalized) sample from p(x|class).
    pub fn sample_raw(&self, class: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.family {
            TaskFamily::Gaussian2d { means, covs } => {
                let m = means[class];
                let c = covs[class];
                // 2x2 Cholesky
                let l11 = c[0][0].sqrt();
                let l21 = c[1][0] / l11;
                let l22 = (c[1][1] - l21 * l21).max(0.0).sqrt();
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                vec![m[0] + l11 * z0, m[1] + l21 * z0 + l22 * z1]
            }
            TaskFamily::Icon8x8 { glyphs, deformation } => glyphs[class]
                .iter()
                .map(|&g| g + deformation * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        }
    }

    /// Closed-form log p(x|class); gaussian2d only.
    pub fn log_density(&self, class: usize, x: &[f64]) -> Result<f64> {
        match &self.family {
            TaskFamily::Gaussian2d { means, covs } => {
                let m = means[class];
                let c = covs[class];
                let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
                if det <= 0.0 {
                    return Err(Error::InvalidInput("covariance not positive definite".into()));
                }
                let inv = [
                    [c[1][1] / det, -c[0][1] / det],
                    [-c[1][0] / det, c[0][0] / det],
                ];
                let d0 = x[0] - m[0];
                let d1 = x[1] - m[1];
                let quad = d0 * (inv[0][0] * d0 + inv[0][1] * d1) + d1 * (inv[1][0] * d0 + inv[1][1] * d1);
                Ok(-0.5 * quad - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln())
            }
            TaskFamily::Icon8x8 { .. } => Err(Error::UnsupportedFamily("icon8x8")),
        }
    }

    /// Per-class generative means (gaussian2d only), used by tests.
    pub fn gaussian_means(&self) -> Option<&[[f64; 2]]> {
        match &self.family {
            TaskFamily::Gaussian2d { means, .. } => Some(means),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_means_on_circle() {
        let t = TaskSpec::gaussian_ring(4, 2.0, 1.0, 0).unwrap();
        for m in t.gaussian_means().unwrap() {
            let r = (m[0] * m[0] + m[1] * m[1]).sqrt();
            assert!((r - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_density_matches_manual_isotropic() {
        let t = TaskSpec::gaussian_ring(2, 0.0, 1.5, 0).unwrap();
        let x = [0.3, -0.4];
        let sigma2: f64 = 1.5 * 1.5;
        let manual = -0.5 * (x[0] * x[0] + x[1] * x[1]) / sigma2
            - (2.0 * std::f64::consts::PI * sigma2).ln();
        let got = t.log_density(0, &x).unwrap();
        assert!((got - manual).abs() < 1e-10, "{got} vs {manual}");
    }

    #[test]
    fn icon_density_unsupported() {
        let t = TaskSpec::icons(3, 0.2, 0).unwrap();
        assert!(t.log_density(0, &vec![0.0; 64]).is_err());
    }
}

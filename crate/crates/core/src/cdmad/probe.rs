use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DatasetHeader;
use crate::error::{Error, Result};
use crate::nn::MlpModel;
use crate::Mat;

/// Raw (pre-normalization) constants for solid probes. The channel colors are
/// single-channel luma analogs, since our inputs are one-channel stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolidColor {
    White,
    Black,
    Gray,
    Red,
    Green,
    Blue,
}

impl SolidColor {
    pub fn raw_value(self) -> f64 {
        match self {
            SolidColor::White => 1.0,
            SolidColor::Black => 0.0,
            SolidColor::Gray => 0.5,
            SolidColor::Red => 0.299,
            SolidColor::Green => 0.587,
            SolidColor::Blue => 0.114,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolidColor::White => "white",
            SolidColor::Black => "black",
            SolidColor::Gray => "gray",
            SolidColor::Red => "red",
            SolidColor::Green => "green",
            SolidColor::Blue => "blue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomDist {
    Uniform,
    Bernoulli,
    Normal,
}

impl RandomDist {
    pub fn name(self) -> &'static str {
        match self {
            RandomDist::Uniform => "uniform",
            RandomDist::Bernoulli => "bernoulli",
            RandomDist::Normal => "normal",
        }
    }
}

/// Probe specification as it appears in run configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeKind {
    Solid { color: SolidColor },
    Random { dist: RandomDist, seed: u64 },
    NonImage,
}

impl ProbeKind {
    pub fn name(&self) -> String {
        match self {
            ProbeKind::Solid { color } => color.name().to_string(),
            ProbeKind::Random { dist, .. } => dist.name().to_string(),
            ProbeKind::NonImage => "nonimage".to_string(),
        }
    }
}

/// A probe realized in the dataset's normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeInput {
    pub kind: ProbeKind,
    pub vector: Vec<f64>,
}

/// Build the probe input for a dataset. Solid probes push a raw constant
/// through the dataset normalization; random probes draw raw i.i.d. entries
/// with their own fixed seed; the non-image probe places every entry at
/// `ceil(norm_max) + 1`, strictly outside the observed normalized range.
pub fn make_probe(kind: ProbeKind, header: &DatasetHeader) -> Result<ProbeInput> {
    let d = header.dim;
    let vector = match kind {
        ProbeKind::Solid { color } => vec![header.normalize(color.raw_value()); d],
        ProbeKind::Random { dist, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..d)
                .map(|_| {
                    let raw = match dist {
                        RandomDist::Uniform => rng.gen::<f64>(),
                        RandomDist::Bernoulli => {
                            if rng.gen_bool(0.5) {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        RandomDist::Normal => rng.sample(StandardNormal),
                    };
                    header.normalize(raw)
                })
                .collect()
        }
        ProbeKind::NonImage => {
            // smallest integer strictly above the observed normalized max
            // (an observed max near 2.1 puts the probe at 3)
            let mut v = header.norm_max.ceil();
            if v <= header.norm_max {
                v += 1.0;
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(
                    "dataset norm_max is not finite".into(),
                ));
            }
            vec![v; d]
        }
    };
    Ok(ProbeInput { kind, vector })
}

/// Logits of the model on a probe: the classifier's per-class bias reading.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasLogits {
    pub g: Vec<f64>,
    pub probe: String,
}

/// Evaluate the probe through the classifier, without augmentation and
/// without keeping any gradient state.
pub fn measure_bias(model: &MlpModel<f64>, probe: &ProbeInput) -> Result<BiasLogits> {
    let x = Mat::new(1, probe.vector.len(), probe.vector.clone())?;
    let logits = model.logits(&x)?;
    let g = logits.row(0).to_vec();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("bias logits are not finite".into()));
    }
    Ok(BiasLogits {
        g,
        probe: probe.kind.name(),
    })
}

use serde::{Deserialize, Serialize};

use crate::cdmad::{Algo, PriorMode, ProbeKind, SolidColor};
use crate::data::{longtail_counts, FamilyKind, TaskSpec};
use crate::error::{Error, Result};

/// Task geometry. Every field has a default so `{}` is a valid config.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TaskConfig {
    pub family: FamilyKind,
    pub classes: usize,
    /// gaussian2d: ring radius of the class means.
    pub radius: f64,
    /// gaussian2d: isotropic standard deviation.
    pub sigma: f64,
    /// icon8x8: glyph deformation noise scale.
    pub deformation: f64,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            family: FamilyKind::Gaussian2d,
            classes: 10,
            radius: 4.0,
            sigma: 0.6,
            deformation: 0.25,
            seed: 7,
        }
    }
}

impl TaskConfig {
    pub fn build(&self) -> Result<TaskSpec> {
        match self.family {
            FamilyKind::Gaussian2d => {
                TaskSpec::gaussian_ring(self.classes, self.radius, self.sigma, self.seed)
            }
            FamilyKind::Icon8x8 => TaskSpec::icons(self.classes, self.deformation, self.seed),
        }
    }
}

/// Long-tailed split sizes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DataConfig {
    /// Head-class labeled count.
    pub n1: usize,
    pub gamma_l: f64,
    /// Head-class unlabeled count.
    pub m1: usize,
    pub gamma_u: f64,
    /// Whether the learner is allowed to read true unlabeled counts.
    pub gamma_u_known: bool,
    /// Reverse the unlabeled tail (mismatch scenario).
    pub reversed_u: bool,
    pub test_per_class: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            n1: 300,
            gamma_l: 100.0,
            m1: 600,
            gamma_u: 1.0,
            gamma_u_known: false,
            reversed_u: false,
            test_per_class: 100,
        }
    }
}

impl DataConfig {
    pub fn labeled_counts(&self, classes: usize) -> Result<Vec<usize>> {
        longtail_counts(self.n1, self.gamma_l, classes, false)
    }

    pub fn unlabeled_counts(&self, classes: usize) -> Result<Vec<usize>> {
        longtail_counts(self.m1, self.gamma_u, classes, self.reversed_u)
    }
}

/// Test-time refinement rule selection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RefineConfig {
    None,
    Cdmad {
        #[serde(default = "default_probe")]
        probe: ProbeKind,
    },
    La {
        #[serde(default = "default_prior_mode")]
        mode: PriorMode,
        #[serde(default)]
        oracle_override: bool,
    },
}

pub fn default_probe() -> ProbeKind {
    ProbeKind::Solid { color: SolidColor::White }
}

fn default_prior_mode() -> PriorMode {
    PriorMode::Labeled
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig::Cdmad { probe: default_probe() }
    }
}

impl RefineConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RefineConfig::None => "none",
            RefineConfig::Cdmad { .. } => "cdmad",
            RefineConfig::La { .. } => "la",
        }
    }

    pub fn probe_name(&self) -> String {
        match self {
            RefineConfig::Cdmad { probe } => probe.name(),
            _ => String::new(),
        }
    }
}

/// Ablation toggles. `None` means "whatever the phase and refinement rule
/// imply"; `Some` forces the choice during the post-warm phase.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ModConfig {
    /// Harden pseudo-labels before use.
    pub hard_labels: Option<bool>,
    /// Sharpen pseudo-labels (remixmatch).
    pub sharpen: Option<bool>,
    /// Confidence threshold (fixmatch).
    pub tau: Option<f64>,
    /// Distribution alignment (remixmatch).
    pub distribution_align: Option<bool>,
    /// Extra supervised term (remixmatch + debiasing).
    pub extra_sup: Option<bool>,
    /// Training-time pseudo-label refinement.
    pub train_refine: Option<bool>,
    /// Test-time prediction refinement.
    pub test_refine: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    pub task: TaskConfig,
    pub data: DataConfig,
    pub algo: Algo,
    pub refine: RefineConfig,
    pub modifications: ModConfig,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    /// Defaults to 20% of `epochs` when absent.
    pub warm_epochs: Option<usize>,
    /// Labeled batch size; defaults to 32 (fixmatch) / 64 (remixmatch).
    pub b: Option<usize>,
    pub mu: usize,
    /// Defaults to 1.5e-3 (fixmatch) / 2e-3 (remixmatch).
    pub lr: Option<f64>,
    /// Sharpening temperature.
    pub temperature: f64,
    /// Warm-phase fixmatch confidence threshold.
    pub tau: f64,
    pub ema_decay: f64,
    pub weight_decay: f64,
    pub mixup_alpha: f64,
    /// Hidden layer widths of the MLP trunk.
    pub hidden: Vec<usize>,
    /// Rotation loss toggle (icons + remixmatch only).
    pub rotation: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: TaskConfig::default(),
            data: DataConfig::default(),
            algo: Algo::Fixmatch,
            refine: RefineConfig::default(),
            modifications: ModConfig::default(),
            epochs: 50,
            iters_per_epoch: 100,
            warm_epochs: None,
            b: None,
            mu: 2,
            lr: None,
            temperature: 0.5,
            tau: 0.95,
            ema_decay: 0.999,
            weight_decay: 0.04,
            mixup_alpha: 0.75,
            hidden: vec![64, 64],
            rotation: true,
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn warm_epochs(&self) -> usize {
        self.warm_epochs.unwrap_or(self.epochs / 5)
    }

    pub fn batch_size(&self) -> usize {
        self.b.unwrap_or(match self.algo {
            Algo::Fixmatch => 32,
            Algo::Remixmatch => 64,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr.unwrap_or(match self.algo {
            Algo::Fixmatch => 1.5e-3,
            Algo::Remixmatch => 2e-3,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.iters_per_epoch == 0 {
            return Err(Error::InvalidConfig("epochs and iters_per_epoch must be >= 1".into()));
        }
        if self.warm_epochs() > self.epochs {
            return Err(Error::InvalidConfig(format!(
                "warm_epochs {} exceeds epochs {}",
                self.warm_epochs(),
                self.epochs
            )));
        }
        if self.batch_size() < 1 || self.mu < 1 {
            return Err(Error::InvalidConfig("B and mu must be >= 1".into()));
        }
        for (name, v) in [
            ("lr", self.learning_rate()),
            ("temperature", self.temperature),
            ("ema_decay", self.ema_decay),
            ("mixup_alpha", self.mixup_alpha),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.weight_decay < 0.0 || self.tau < 0.0 {
            return Err(Error::InvalidConfig("weight_decay and tau must be >= 0".into()));
        }
        if self.hidden.is_empty() {
            return Err(Error::InvalidConfig("need at least one hidden layer".into()));
        }
        if let RefineConfig::La { mode: PriorMode::FullTraining, oracle_override } = self.refine {
            if !self.data.gamma_u_known && !oracle_override {
                return Err(Error::InvalidConfig(
                    "la full_training prior requires gamma_u_known or oracle_override".into(),
                ));
            }
        }
        Ok(())
    }

    /// Short stable identifier derived from the canonical JSON serialization
    /// (seed excluded, so repeats of one cell share an id).
    pub fn config_id(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        // FNV-1a, hex-truncated
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Sweep grid: JSON deltas deep-merged onto the base config, each run once
/// per seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub cells: Vec<serde_json::Value>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

/// Recursively overlay `delta` onto `base` (objects merge, everything else
/// replaces).
pub fn deep_merge(base: &serde_json::Value, delta: &serde_json::Value) -> serde_json::Value {
    match (base, delta) {
        (serde_json::Value::Object(b), serde_json::Value::Object(d)) => {
            let mut out = b.clone();
            for (k, v) in d {
                let merged = match out.get(k) {
                    Some(existing) => deep_merge(existing, v),
                    None => v.clone(),
                };
                out.insert(k.clone(), merged);
            }
            serde_json::Value::Object(out)
        }
        _ => delta.clone(),
    }
}

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cdmad::probe::{measure_bias, BiasLogits, ProbeInput};
use crate::data::{BatchPair, FamilyKind, SplitDataset};
use crate::error::{Error, Result};
use crate::nn::{softmax, GradStore, MlpModel};
use crate::ssl::{fixmatch_loss, remixmatch_loss, supervised_loss, LossReport};
use crate::Mat;

/// Which base trainer a step belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Fixmatch,
    Remixmatch,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Fixmatch => "fixmatch",
            Algo::Remixmatch => "remixmatch",
        }
    }
}

/// Subtract the bias logits from every row. Nothing else.
pub fn refine_logits(g_u: &Mat, bias: &BiasLogits) -> Result<Mat> {
    if bias.g.len() != g_u.cols() {
        return Err(Error::shape(
            format!("{} classes", g_u.cols()),
            format!("{} bias entries", bias.g.len()),
        ));
    }
    let mut out = g_u.clone();
    for r in 0..out.rows() {
        for (v, &b) in out.row_mut(r).iter_mut().zip(&bias.g) {
            *v -= b;
        }
    }
    Ok(out)
}

/// Refined pseudo-labels `q* = softmax(g(weak) - g(I))`. Soft by contract:
/// never hardened, never sharpened. The bias is measured once and reused for
/// the whole batch.
pub fn refine_pseudo_label(
    model: &MlpModel<f64>,
    weak_views: &Mat,
    probe: &ProbeInput,
) -> Result<Mat> {
    let bias = measure_bias(model, probe)?;
    refine_pseudo_label_with_bias(model, weak_views, &bias)
}

/// As [`refine_pseudo_label`], reusing an already-measured bias reading.
pub fn refine_pseudo_label_with_bias(
    model: &MlpModel<f64>,
    weak_views: &Mat,
    bias: &BiasLogits,
) -> Result<Mat> {
    let logits = model.logits(weak_views)?;
    softmax(&refine_logits(&logits, bias)?)
}

/// One debiased training step's loss: the base loss evaluated with refined
/// soft pseudo-labels. FixMatch drops the confidence threshold (tau = 0);
/// ReMixMatch drops alignment/sharpening and gains an extra supervised term
/// on the weakly augmented labeled batch, reported separately as `sup`.
#[allow(clippy::too_many_arguments)]
pub fn cdmad_step_loss(
    algo: Algo,
    model: &MlpModel<f64>,
    batch: &BatchPair,
    bias: &BiasLogits,
    family: FamilyKind,
    rot_enabled: bool,
    mixup_alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(LossReport, GradStore<f64>)> {
    let q_star = refine_pseudo_label_with_bias(model, &batch.u_weak, bias)?;
    match algo {
        Algo::Fixmatch => fixmatch_loss(
            model,
            &batch.x_weak,
            &batch.labels_onehot,
            &batch.u_strong,
            &q_star,
            &q_star,
            0.0,
        ),
        Algo::Remixmatch => {
            let (base, mut grads) = remixmatch_loss(
                model,
                &batch.x_strong,
                &batch.labels_onehot,
                &batch.u_strong,
                &q_star,
                &batch.u_raw,
                family,
                rot_enabled,
                mixup_alpha,
                rng,
            )?;
            let (sup, g) = supervised_loss(model, &batch.x_weak, &batch.labels_onehot)?;
            grads.add_assign(&g)?;
            Ok((
                LossReport::from_components(sup, base.con, base.mix, base.rot, base.mask_rate),
                grads,
            ))
        }
    }
}

/// Test-time prediction rule.
#[derive(Debug, Clone, PartialEq)]
pub enum RefinementRule {
    /// Plain `argmax g(x)`.
    None,
    /// `argmax (g(x) - g(I))`.
    Cdmad(ProbeInput),
    /// Logit adjustment: `argmax (g(x) - log pi)`.
    La(Vec<f64>),
}

fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Class predictions on a test batch under the given rule; evaluate on EMA
/// parameters by passing the EMA model. Ties break toward the lowest class
/// index. No rule mutates the model.
pub fn refine_test_predictions(
    model: &MlpModel<f64>,
    x_test: &Mat,
    rule: &RefinementRule,
) -> Result<Vec<usize>> {
    let logits = model.logits(x_test)?;
    let adjusted = match rule {
        RefinementRule::None => logits,
        RefinementRule::Cdmad(probe) => {
            let bias = measure_bias(model, probe)?;
            refine_logits(&logits, &bias)?
        }
        RefinementRule::La(prior) => {
            if prior.len() != logits.cols() {
                return Err(Error::shape(
                    format!("{} classes", logits.cols()),
                    format!("{} prior entries", prior.len()),
                ));
            }
            if prior.iter().any(|&p| p <= 0.0)
                || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-6
            {
                return Err(Error::InvalidInput(
                    "LA prior must be a strictly positive distribution".into(),
                ));
            }
            let mut out = logits;
            for r in 0..out.rows() {
                for (v, &p) in out.row_mut(r).iter_mut().zip(prior) {
                    *v -= p.ln();
                }
            }
            out
        }
    };
    Ok(adjusted.iter_rows().map(argmax_lowest).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Class distribution of the labeled set (the learner always knows this).
    Labeled,
    /// Class distribution of labeled + unlabeled pools; reads true unlabeled
    /// counts, so it is an oracle/ablation-only path.
    FullTraining,
}

/// Empirical class prior of the selected pool. `full_training` is refused
/// when the unlabeled distribution is flagged unknown, unless the caller
/// explicitly sets the oracle override.
pub fn la_prior(
    mode: PriorMode,
    ds: &SplitDataset,
    gamma_u_known: bool,
    oracle_override: bool,
) -> Result<Vec<f64>> {
    let h = ds.header();
    let counts: Vec<usize> = match mode {
        PriorMode::Labeled => h.labeled_counts.clone(),
        PriorMode::FullTraining => {
            if !gamma_u_known && !oracle_override {
                return Err(Error::InvalidConfig(
                    "full-training prior needs unlabeled counts, which are flagged unknown \
                     (set the oracle override to force it)"
                        .into(),
                ));
            }
            h.labeled_counts
                .iter()
                .zip(&h.unlabeled_counts)
                .map(|(&a, &b)| a + b)
                .collect()
        }
    };
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("empty pool for LA prior".into()));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdmad::probe::{make_probe, ProbeKind, SolidColor};
    use crate::data::{longtail_counts, synthesize, TaskSpec};
    use rand::Rng;
    use rand::SeedableRng;

    fn bias(g: Vec<f64>) -> BiasLogits {
        BiasLogits { g, probe: "test".into() }
    }

    #[test]
    fn refine_is_plain_subtraction() {
        let g = Mat::new(1, 3, vec![2.0, 1.0, 0.0]).unwrap();
        let out = refine_logits(&g, &bias(vec![1.5, 0.5, -2.0])).unwrap();
        assert_eq!(out.data(), &[0.5, 0.5, 2.0]);
        assert_eq!(argmax_lowest(out.row(0)), 2);
        let id = refine_logits(&g, &bias(vec![0.0; 3])).unwrap();
        assert_eq!(id.data(), g.data());
    }

    #[test]
    fn ratio_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let g: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let gi: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let gm = Mat::new(1, 4, g.clone()).unwrap();
            let refined = softmax(&refine_logits(&gm, &bias(gi.clone())).unwrap()).unwrap();
            let pg = softmax(&gm).unwrap();
            let pi = softmax(&Mat::new(1, 4, gi).unwrap()).unwrap();
            let ratios: Vec<f64> = (0..4).map(|c| pg.get(0, c) / pi.get(0, c)).collect();
            let z: f64 = ratios.iter().sum();
            for c in 0..4 {
                assert!((refined.get(0, c) - ratios[c] / z).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn uniform_bias_refinement_is_identity_on_probabilities() {
        let model = MlpModel::<f64>::new(&[2, 5, 3], None, 3).unwrap();
        let x = Mat::new(2, 2, vec![0.4, -0.2, 1.0, 0.3]).unwrap();
        let q = softmax(&model.logits(&x).unwrap()).unwrap();
        let qs =
            refine_pseudo_label_with_bias(&model, &x, &bias(vec![0.7, 0.7, 0.7])).unwrap();
        for (a, b) in q.data().iter().zip(qs.data()) {
            assert!((a - b).abs() < 1e-9);
        }
        for row in qs.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn argmax_invariant_to_constant_bias_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let g = Mat::new(1, 5, (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
            let gi: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let shift = rng.gen_range(-10.0..10.0);
            let shifted: Vec<f64> = gi.iter().map(|v| v + shift).collect();
            let a = refine_logits(&g, &bias(gi)).unwrap();
            let b = refine_logits(&g, &bias(shifted)).unwrap();
            assert_eq!(argmax_lowest(a.row(0)), argmax_lowest(b.row(0)));
        }
    }

    #[test]
    fn la_rule_examples() {
        // uniform prior is a constant shift: identical to no refinement
        let model = MlpModel::<f64>::new(&[2, 4, 3], None, 5).unwrap();
        let x = Mat::new(4, 2, vec![0.1, 0.5, -0.4, 0.2, 1.2, -0.7, 0.0, 0.0]).unwrap();
        let none = refine_test_predictions(&model, &x, &RefinementRule::None).unwrap();
        let la = refine_test_predictions(
            &model,
            &x,
            &RefinementRule::La(vec![1.0 / 3.0; 3]),
        )
        .unwrap();
        assert_eq!(none, la);
    }

    #[test]
    fn la_min_prior_wins_on_flat_logits() {
        // logits (1,1,1) with prior (0.5,0.3,0.2): class 2 has the smallest
        // log prior subtracted, so it wins
        let mut model = MlpModel::<f64>::new(&[1, 3], None, 0).unwrap();
        {
            let mut s = model.param_slices_mut();
            s[0].copy_from_slice(&[0.0, 0.0, 0.0]);
            s[1].copy_from_slice(&[1.0, 1.0, 1.0]);
        }
        let x = Mat::new(1, 1, vec![0.3]).unwrap();
        let preds =
            refine_test_predictions(&model, &x, &RefinementRule::La(vec![0.5, 0.3, 0.2]))
                .unwrap();
        assert_eq!(preds, vec![2]);
    }

    #[test]
    fn cdmad_rule_matches_probability_ratio_form() {
        let t = TaskSpec::gaussian_ring(3, 2.0, 1.0, 2).unwrap();
        let ds = synthesize(&t, &[20, 10, 5], &[20, 20, 20], 10, 4).unwrap();
        let model = MlpModel::<f64>::new(&[2, 8, 3], None, 6).unwrap();
        let probe =
            make_probe(ProbeKind::Solid { color: SolidColor::White }, ds.header()).unwrap();
        let (tx, _) = ds.test();
        let preds =
            refine_test_predictions(&model, tx, &RefinementRule::Cdmad(probe.clone())).unwrap();
        let logits = model.logits(tx).unwrap();
        let p = softmax(&logits).unwrap();
        let b = measure_bias(&model, &probe).unwrap();
        let pi = softmax(&Mat::new(1, 3, b.g.clone()).unwrap()).unwrap();
        for (r, &pred) in preds.iter().enumerate() {
            let ratios: Vec<f64> = (0..3).map(|c| p.get(r, c) / pi.get(0, c)).collect();
            assert_eq!(pred, argmax_lowest(&ratios));
        }
    }

    #[test]
    fn la_prior_profiles() {
        let t = TaskSpec::gaussian_ring(10, 2.0, 1.0, 1).unwrap();
        let lc = longtail_counts(1500, 100.0, 10, false).unwrap();
        let uc = longtail_counts(600, 1.0, 10, false).unwrap();
        let ds = synthesize(&t, &lc, &uc, 2, 5).unwrap();
        let pi = la_prior(PriorMode::Labeled, &ds, false, false).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let ratio = pi[0] / pi[9];
        assert!((ratio - 100.0).abs() / 100.0 < 0.05, "ratio {ratio}");
        // unknown gamma_u blocks the full-training prior without the override
        assert!(la_prior(PriorMode::FullTraining, &ds, false, false).is_err());
        let full = la_prior(PriorMode::FullTraining, &ds, false, true).unwrap();
        assert_ne!(pi, full);
        // balanced labeled set gives a uniform prior
        let flat = synthesize(&t, &[5; 10], &[5; 10], 2, 5).unwrap();
        let pi = la_prior(PriorMode::Labeled, &flat, true, false).unwrap();
        assert!(pi.iter().all(|&p| (p - 0.1).abs() < 1e-12));
    }

    #[test]
    fn refinement_does_not_mutate_model() {
        let model = MlpModel::<f64>::new(&[2, 4, 3], None, 8).unwrap();
        let before: Vec<f64> = model
            .param_slices()
            .iter()
            .flat_map(|s| s.iter().cloned())
            .collect();
        let x = Mat::new(3, 2, vec![0.5; 6]).unwrap();
        let _ = refine_test_predictions(&model, &x, &RefinementRule::None).unwrap();
        let _ = refine_pseudo_label_with_bias(&model, &x, &bias(vec![0.1, 0.2, 0.3])).unwrap();
        let after: Vec<f64> = model
            .param_slices()
            .iter()
            .flat_map(|s| s.iter().cloned())
            .collect();
        assert_eq!(before, after);
    }
}

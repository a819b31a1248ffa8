use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cdmad::{
    la_prior, make_probe, measure_bias, refine_logits, refine_test_predictions, Algo, BiasLogits,
    ProbeInput, RefinementRule,
};
use crate::data::{mix_seed, synthesize, BatchPair, BatchStream, FamilyKind, SplitDataset};
use crate::error::Result;
use crate::eval::{confusion, ConfusionMatrix, MetricsRecord};
use crate::harness::config::{default_probe, RefineConfig, RunConfig};
use crate::nn::{
    adam_step, softmax, AdamConfig, AdamState, EmaParams, GradStore, MlpModel,
};
use crate::ssl::{
    distribution_align, fixmatch_loss, harden, remixmatch_loss, sharpen, supervised_loss,
    AlignState, LossReport,
};
use crate::Mat;

/// Everything one training run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    pub config_id: String,
    pub seed: u64,
    pub final_metrics: MetricsRecord,
    pub final_confusion: ConfusionMatrix,
    /// EMA-model test metrics, one per epoch.
    pub epoch_metrics: Vec<MetricsRecord>,
    /// softmax(g(I)) on the EMA model, one row per epoch.
    pub bias_trace: Vec<Vec<f64>>,
    /// Pseudo-label quality vs hidden true labels (eval-only), per epoch.
    pub pseudo_confusions: Vec<ConfusionMatrix>,
    /// Mean training loss per epoch.
    pub loss_trace: Vec<LossReport>,
}

/// How one training step treats pseudo-labels. Derived from the phase,
/// refinement rule and ablation toggles.
#[derive(Debug, Clone, Copy, PartialEq)]
struct StepPlan {
    refine: bool,
    hard: bool,
    sharpen: bool,
    align: bool,
    tau: f64,
    extra_sup: bool,
}

fn step_plan(cfg: &RunConfig, warm: bool) -> StepPlan {
    let base = match cfg.algo {
        Algo::Fixmatch => StepPlan {
            refine: false,
            hard: true,
            sharpen: false,
            align: false,
            tau: cfg.tau,
            extra_sup: false,
        },
        Algo::Remixmatch => StepPlan {
            refine: false,
            hard: false,
            sharpen: true,
            align: true,
            tau: 0.0,
            extra_sup: false,
        },
    };
    if warm {
        return base;
    }
    let m = &cfg.modifications;
    let refine = m
        .train_refine
        .unwrap_or(matches!(cfg.refine, RefineConfig::Cdmad { .. }));
    let mut plan = if refine {
        // debiased step: soft refined labels, no threshold, no alignment or
        // sharpening; remixmatch gains the extra supervised term
        StepPlan {
            refine: true,
            hard: false,
            sharpen: false,
            align: false,
            tau: 0.0,
            extra_sup: cfg.algo == Algo::Remixmatch,
        }
    } else {
        base
    };
    if let Some(v) = m.hard_labels {
        plan.hard = v;
    }
    if let Some(v) = m.sharpen {
        plan.sharpen = v;
    }
    if let Some(v) = m.tau {
        plan.tau = v;
    }
    if let Some(v) = m.distribution_align {
        plan.align = v;
    }
    if let Some(v) = m.extra_sup {
        plan.extra_sup = v;
    }
    plan
}

/// Pseudo-labels for a batch of weak views under a plan (soft, before any
/// hardening), measuring the bias once when refinement is on.
fn plan_pseudo_labels(
    model: &MlpModel<f64>,
    u_weak: &Mat,
    plan: StepPlan,
    probe: &ProbeInput,
) -> Result<Mat> {
    let logits = model.logits(u_weak)?;
    if plan.refine {
        let bias = measure_bias(model, probe)?;
        softmax(&refine_logits(&logits, &bias)?)
    } else {
        softmax(&logits)
    }
}

#[allow(clippy::too_many_arguments)]
fn training_step(
    cfg: &RunConfig,
    model: &MlpModel<f64>,
    batch: &BatchPair,
    plan: StepPlan,
    probe: &ProbeInput,
    p_labeled: &[f64],
    align_state: &mut AlignState,
    family: FamilyKind,
    rot_enabled: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(LossReport, GradStore<f64>)> {
    let mut q = plan_pseudo_labels(model, &batch.u_weak, plan, probe)?;
    if plan.align {
        q = distribution_align(&q, p_labeled, align_state)?;
    }
    if plan.sharpen {
        q = sharpen(&q, cfg.temperature)?;
    }
    let q_targets = if plan.hard { harden(&q) } else { q.clone() };
    match cfg.algo {
        Algo::Fixmatch => fixmatch_loss(
            model,
            &batch.x_weak,
            &batch.labels_onehot,
            &batch.u_strong,
            &q,
            &q_targets,
            plan.tau,
        ),
        Algo::Remixmatch => {
            let (base, mut grads) = remixmatch_loss(
                model,
                &batch.x_strong,
                &batch.labels_onehot,
                &batch.u_strong,
                &q_targets,
                &batch.u_raw,
                family,
                rot_enabled,
                cfg.mixup_alpha,
                rng,
            )?;
            if plan.extra_sup {
                let (sup, g) = supervised_loss(model, &batch.x_weak, &batch.labels_onehot)?;
                grads.add_assign(&g)?;
                Ok((
                    LossReport::from_components(sup, base.con, base.mix, base.rot, base.mask_rate),
                    grads,
                ))
            } else {
                Ok((base, grads))
            }
        }
    }
}

fn effective_test_rule(
    cfg: &RunConfig,
    ds: &SplitDataset,
    probe: &ProbeInput,
) -> Result<RefinementRule> {
    if cfg.modifications.test_refine == Some(false) {
        return Ok(RefinementRule::None);
    }
    Ok(match cfg.refine {
        RefineConfig::None => {
            if cfg.modifications.test_refine == Some(true) {
                RefinementRule::Cdmad(probe.clone())
            } else {
                RefinementRule::None
            }
        }
        RefineConfig::Cdmad { .. } => RefinementRule::Cdmad(probe.clone()),
        RefineConfig::La { mode, oracle_override } => RefinementRule::La(la_prior(
            mode,
            ds,
            cfg.data.gamma_u_known,
            oracle_override,
        )?),
    })
}

/// Train one configuration end to end and evaluate on the EMA model.
/// Strictly sequential and deterministic in the seed.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let task = cfg.task.build()?;
    let labeled_counts = cfg.data.labeled_counts(task.classes)?;
    let unlabeled_counts = cfg.data.unlabeled_counts(task.classes)?;
    let ds = synthesize(
        &task,
        &labeled_counts,
        &unlabeled_counts,
        cfg.data.test_per_class,
        mix_seed(cfg.seed, 0xDA7A),
    )?;
    let family = ds.header().family;
    let classes = ds.header().classes;

    let probe = match &cfg.refine {
        RefineConfig::Cdmad { probe } => make_probe(*probe, ds.header())?,
        _ => make_probe(default_probe(), ds.header())?,
    };
    let test_rule = effective_test_rule(cfg, &ds, &probe)?;

    let rot_head = cfg.algo == Algo::Remixmatch && family == FamilyKind::Icon8x8 && cfg.rotation;
    let mut dims = vec![ds.header().dim];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(classes);
    let mut model = MlpModel::<f64>::new(
        &dims,
        if rot_head { Some(4) } else { None },
        mix_seed(cfg.seed, 0x30DE),
    )?;
    let mut adam = AdamState::new(
        &model,
        AdamConfig {
            lr: cfg.learning_rate(),
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
    );
    let mut ema = EmaParams::new(&model, cfg.ema_decay)?;
    let mut stream = BatchStream::new(&ds, cfg.batch_size(), cfg.mu, mix_seed(cfg.seed, 0xBA7C))?;
    let mut step_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x57E9));
    let mut align_state = AlignState::new(classes)?;
    let p_labeled = ds.labeled_class_distribution();

    let (test_x, test_y) = ds.test();
    let mut epoch_metrics = Vec::with_capacity(cfg.epochs);
    let mut bias_trace = Vec::with_capacity(cfg.epochs);
    let mut pseudo_confusions = Vec::with_capacity(cfg.epochs);
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let warm = epoch < cfg.warm_epochs();
        let plan = step_plan(cfg, warm);
        let mut epoch_loss = LossReport::default();
        for _ in 0..cfg.iters_per_epoch {
            let batch = stream.next_batch()?;
            let (report, grads) = training_step(
                cfg,
                &model,
                &batch,
                plan,
                &probe,
                &p_labeled,
                &mut align_state,
                family,
                rot_head,
                &mut step_rng,
            )?;
            adam_step(&mut adam, &mut model, &grads)?;
            ema.update(&model)?;
            epoch_loss.total += report.total;
            epoch_loss.sup += report.sup;
            epoch_loss.con += report.con;
            epoch_loss.mix += report.mix;
            epoch_loss.rot += report.rot;
            epoch_loss.mask_rate += report.mask_rate;
        }
        let n = cfg.iters_per_epoch as f64;
        epoch_loss.total /= n;
        epoch_loss.sup /= n;
        epoch_loss.con /= n;
        epoch_loss.mix /= n;
        epoch_loss.rot /= n;
        epoch_loss.mask_rate /= n;
        loss_trace.push(epoch_loss);

        // per-epoch evaluation on the EMA model
        let preds = refine_test_predictions(ema.model(), test_x, &test_rule)?;
        let conf = confusion(&preds, test_y, classes)?;
        epoch_metrics.push(MetricsRecord::from_confusion(
            &conf,
            cfg.seed,
            epoch,
            cfg.algo.name(),
            cfg.refine.name(),
            &probe.kind.name(),
        )?);

        let bias = measure_bias(ema.model(), &probe)?;
        let probs = softmax(&Mat::new(1, classes, bias.g.clone())?)?;
        bias_trace.push(probs.row(0).to_vec());

        pseudo_confusions.push(pseudo_label_quality(
            &model,
            &ds,
            plan,
            &probe,
            classes,
        )?);
    }

    let final_metrics = epoch_metrics.last().expect("epochs >= 1").clone();
    let preds = refine_test_predictions(ema.model(), test_x, &test_rule)?;
    let final_confusion = confusion(&preds, test_y, classes)?;

    Ok(RunResult {
        config: cfg.clone(),
        config_id: cfg.config_id(),
        seed: cfg.seed,
        final_metrics,
        final_confusion,
        epoch_metrics,
        bias_trace,
        pseudo_confusions,
        loss_trace,
    })
}

/// Eval-only trace: hardened pseudo-labels of the whole unlabeled pool
/// against its hidden true labels.
fn pseudo_label_quality(
    model: &MlpModel<f64>,
    ds: &SplitDataset,
    plan: StepPlan,
    probe: &ProbeInput,
    classes: usize,
) -> Result<ConfusionMatrix> {
    let q = plan_pseudo_labels(model, ds.unlabeled_inputs(), plan, probe)?;
    let preds: Vec<usize> = q
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    confusion(&preds, ds.eval_only_unlabeled_labels(), classes)
}

/// Bias reading used by traces and tests: softmax of the EMA probe logits.
pub fn bias_distribution(model: &MlpModel<f64>, probe: &ProbeInput) -> Result<Vec<f64>> {
    let bias: BiasLogits = measure_bias(model, probe)?;
    let probs = softmax(&Mat::new(1, bias.g.len(), bias.g)?)?;
    Ok(probs.row(0).to_vec())
}

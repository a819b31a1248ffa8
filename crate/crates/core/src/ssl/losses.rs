use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::{mixup, FamilyKind, ICON_SIDE};
use crate::error::{Error, Result};
use crate::nn::{cross_entropy, softmax, softmax_ce_grad, GradStore, MlpModel, LOG_FLOOR};
use crate::ssl::pseudo::confidence_mask;
use crate::Mat;

/// Per-step loss audit: the scalar actually optimized plus its named parts.
/// `total` is always the plain sum of the enabled components.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossReport {
    pub total: f64,
    pub sup: f64,
    pub con: f64,
    pub mix: f64,
    pub rot: f64,
    /// Fraction of unlabeled samples passing the confidence threshold
    /// (1.0 for losses without a threshold).
    pub mask_rate: f64,
}

impl LossReport {
    pub fn from_components(sup: f64, con: f64, mix: f64, rot: f64, mask_rate: f64) -> Self {
        LossReport {
            total: sup + con + mix + rot,
            sup,
            con,
            mix,
            rot,
            mask_rate,
        }
    }
}

fn row_cross_entropy(probs: &[f64], target: &[f64]) -> f64 {
    probs
        .iter()
        .zip(target)
        .map(|(&p, &t)| -t * p.max(LOG_FLOOR).ln())
        .sum()
}

/// Mean cross-entropy of the model on `(x, targets)` plus its gradients.
pub fn supervised_loss(
    model: &MlpModel<f64>,
    x: &Mat,
    targets: &Mat,
) -> Result<(f64, GradStore<f64>)> {
    let (logits, cache) = model.forward(x)?;
    let probs = softmax(&logits)?;
    let loss = cross_entropy(&probs, targets)?;
    let grads = model.backward(&cache, &softmax_ce_grad(&probs, targets)?)?;
    Ok((loss, grads))
}

/// FixMatch-style loss: supervised term on the weakly augmented labeled batch
/// plus confidence-masked consistency on the strongly augmented unlabeled
/// batch. The mask comes from `q_soft` (the raw pseudo-label confidences)
/// while `q_targets` carries the training targets, so hard warm-up targets
/// and soft refined targets share one code path. Gradients never flow into
/// the targets.
#[allow(clippy::too_many_arguments)]
pub fn fixmatch_loss(
    model: &MlpModel<f64>,
    mx_weak: &Mat,
    mx_targets: &Mat,
    mu_strong: &Mat,
    q_soft: &Mat,
    q_targets: &Mat,
    tau: f64,
) -> Result<(LossReport, GradStore<f64>)> {
    if mx_weak.rows() != mx_targets.rows() {
        return Err(Error::shape(
            format!("{} labeled rows", mx_weak.rows()),
            format!("{} target rows", mx_targets.rows()),
        ));
    }
    if mu_strong.rows() != q_targets.rows() || mu_strong.rows() != q_soft.rows() {
        return Err(Error::shape(
            format!("{} unlabeled rows", mu_strong.rows()),
            format!("{}/{} pseudo-label rows", q_soft.rows(), q_targets.rows()),
        ));
    }

    let (sup, mut grads) = supervised_loss(model, mx_weak, mx_targets)?;

    let mask = confidence_mask(q_soft, tau);
    let mask_rate = mask.iter().filter(|&&m| m).count() as f64 / mask.len().max(1) as f64;

    let (u_logits, u_cache) = model.forward(mu_strong)?;
    let u_probs = softmax(&u_logits)?;
    let mu_b = mu_strong.rows() as f64;
    let mut con = 0.0;
    // (p - q) / muB on masked rows, zero elsewhere
    let mut dlogits = softmax_ce_grad(&u_probs, q_targets)?;
    for (r, &m) in mask.iter().enumerate() {
        if m {
            con += row_cross_entropy(u_probs.row(r), q_targets.row(r));
        } else {
            for v in dlogits.row_mut(r) {
                *v = 0.0;
            }
        }
    }
    con /= mu_b;
    grads.add_assign(&model.backward(&u_cache, &dlogits)?)?;

    Ok((LossReport::from_components(sup, con, 0.0, 0.0, mask_rate), grads))
}

/// Rotate a flattened 8x8 icon by `quarter_turns` exact 90-degree steps
/// (counterclockwise), as a pure index permutation.
pub fn rotate_icon(x: &[f64], quarter_turns: usize) -> Vec<f64> {
    let n = ICON_SIDE;
    let mut cur = x.to_vec();
    for _ in 0..quarter_turns % 4 {
        let mut next = vec![0.0; cur.len()];
        for r in 0..n {
            for c in 0..n {
                // counterclockwise: destination (r, c) pulls from (c, n-1-r)
                next[r * n + c] = cur[c * n + (n - 1 - r)];
            }
        }
        cur = next;
    }
    cur
}

/// Rotate each icon in the batch by a random multiple of 90 degrees and
/// return the views with their degree labels in {0, 1, 2, 3}.
pub fn rotation_views(
    u: &Mat,
    family: FamilyKind,
    rng: &mut ChaCha8Rng,
) -> Result<(Mat, Vec<usize>)> {
    if family != FamilyKind::Icon8x8 {
        return Err(Error::UnsupportedFamily("rotation views need icon8x8"));
    }
    if u.cols() != ICON_SIDE * ICON_SIDE {
        return Err(Error::shape(
            format!("{} cols", ICON_SIDE * ICON_SIDE),
            format!("{} cols", u.cols()),
        ));
    }
    use rand::Rng;
    let mut rows = Vec::with_capacity(u.rows());
    let mut labels = Vec::with_capacity(u.rows());
    for r in 0..u.rows() {
        let k = rng.gen_range(0..4usize);
        rows.push(rotate_icon(u.row(r), k));
        labels.push(k);
    }
    Ok((Mat::from_rows(&rows)?, labels))
}

/// ReMixMatch-style loss: mixup regularization on the strong views, unmasked
/// consistency on the strong unlabeled views, and (for icons) a 4-way
/// rotation-prediction term through the shared trunk. Each of the two mixup
/// calls pairs its batch with a slice of one shuffled copy of the
/// concatenated strong pool and draws its own lambda.
#[allow(clippy::too_many_arguments)]
pub fn remixmatch_loss(
    model: &MlpModel<f64>,
    mx_strong: &Mat,
    mx_targets: &Mat,
    mu_strong: &Mat,
    q_targets: &Mat,
    u_raw: &Mat,
    family: FamilyKind,
    rot_enabled: bool,
    mixup_alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(LossReport, GradStore<f64>)> {
    if mx_strong.rows() != mx_targets.rows() || mu_strong.rows() != q_targets.rows() {
        return Err(Error::shape(
            "matching batch/target row counts".to_string(),
            format!(
                "{}x{} labeled, {}x{} unlabeled",
                mx_strong.rows(),
                mx_targets.rows(),
                mu_strong.rows(),
                q_targets.rows()
            ),
        ));
    }
    let b = mx_strong.rows();

    // shuffled copy of the concatenated pool supplies mixing partners
    let pool_x = mx_strong.vstack(mu_strong)?;
    let pool_t = mx_targets.vstack(q_targets)?;
    let mut order: Vec<usize> = (0..pool_x.rows()).collect();
    order.shuffle(rng);
    let part_lx = pool_x.select_rows(&order[..b]);
    let part_lt = pool_t.select_rows(&order[..b]);
    let part_ux = pool_x.select_rows(&order[b..]);
    let part_ut = pool_t.select_rows(&order[b..]);

    let (mixed_lx, mixed_lt, _) = mixup(mx_strong, mx_targets, &part_lx, &part_lt, mixup_alpha, rng)?;
    let (mixed_ux, mixed_ut, _) = mixup(mu_strong, q_targets, &part_ux, &part_ut, mixup_alpha, rng)?;

    let (mix_l, mut grads) = supervised_loss(model, &mixed_lx, &mixed_lt)?;
    let (mix_u, g) = supervised_loss(model, &mixed_ux, &mixed_ut)?;
    grads.add_assign(&g)?;
    let mix = mix_l + mix_u;

    let (con, g) = supervised_loss(model, mu_strong, q_targets)?;
    grads.add_assign(&g)?;

    let mut rot = 0.0;
    if rot_enabled && family == FamilyKind::Icon8x8 {
        let (views, degrees) = rotation_views(u_raw, family, rng)?;
        let mut targets = Mat::zeros(views.rows(), 4);
        for (r, &d) in degrees.iter().enumerate() {
            targets.set(r, d, 1.0);
        }
        let (logits, cache) = model.forward_rotation(&views)?;
        let probs = softmax(&logits)?;
        rot = cross_entropy(&probs, &targets)?;
        grads.add_assign(&model.backward_rotation(&cache, &softmax_ce_grad(&probs, &targets)?)?)?;
    }

    Ok((LossReport::from_components(0.0, con, mix, rot, 1.0), grads))
}

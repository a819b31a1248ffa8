use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::synth::DatasetHeader;
use crate::data::task::{FamilyKind, ICON_SIDE};

/// Weak gaussian2d noise, in units of the normalized dataset sigma (= 1).
pub const WEAK_NOISE_SCALE: f64 = 0.1;
/// Strong gaussian2d noise scale.
pub const STRONG_NOISE_SCALE: f64 = 0.3;
/// Probability of zeroing one coordinate under strong gaussian2d augmentation.
pub const DROPOUT_PROB: f64 = 0.3;
/// Side of the square masked out of icons under strong augmentation.
pub const CUTOUT_SIZE: usize = 3;
/// Brightness jitter range for icons (multiplicative, raw space).
pub const JITTER_FRAC: f64 = 0.2;

/// Normalization facts the augmenters need.
#[derive(Debug, Clone, Copy)]
pub struct AugmentContext {
    pub family: FamilyKind,
    pub mean: f64,
    pub scale: f64,
}

impl AugmentContext {
    pub fn from_header(h: &DatasetHeader) -> Self {
        AugmentContext {
            family: h.family,
            mean: h.mean,
            scale: h.scale,
        }
    }

    /// Normalized value of raw zero.
    pub fn fill(&self) -> f64 {
        -self.mean / self.scale
    }
}

/// Additive isotropic noise in normalized coordinates.
pub fn gaussian_noise(x: &[f64], scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    x.iter()
        .map(|&v| v + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Horizontal flip of a flattened 8x8 icon.
pub fn icon_flip_h(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for r in 0..ICON_SIDE {
        for c in 0..ICON_SIDE {
            out[r * ICON_SIDE + c] = x[r * ICON_SIDE + (ICON_SIDE - 1 - c)];
        }
    }
    out
}

/// Shift an icon by (dr, dc) pixels, padding with `pad`.
pub fn icon_shift(x: &[f64], dr: i32, dc: i32, pad: f64) -> Vec<f64> {
    let mut out = vec![pad; x.len()];
    for r in 0..ICON_SIDE as i32 {
        for c in 0..ICON_SIDE as i32 {
            let sr = r - dr;
            let sc = c - dc;
            if sr >= 0 && sr < ICON_SIDE as i32 && sc >= 0 && sc < ICON_SIDE as i32 {
                out[(r * ICON_SIDE as i32 + c) as usize] = x[(sr * ICON_SIDE as i32 + sc) as usize];
            }
        }
    }
    out
}

/// Set the `size x size` square with the given top-left corner to `fill`.
pub fn icon_cutout(x: &[f64], top: usize, left: usize, size: usize, fill: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    for r in top..(top + size).min(ICON_SIDE) {
        for c in left..(left + size).min(ICON_SIDE) {
            out[r * ICON_SIDE + c] = fill;
        }
    }
    out
}

fn icon_brightness(x: &[f64], factor: f64, ctx: &AugmentContext) -> Vec<f64> {
    // multiplicative in raw space: denormalize, scale, renormalize
    x.iter()
        .map(|&v| ((v * ctx.scale + ctx.mean) * factor - ctx.mean) / ctx.scale)
        .collect()
}

/// Label-preserving light augmentation: noise for gaussian2d, flip/shift for
/// icons.
pub fn weak_augment(x: &[f64], ctx: &AugmentContext, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match ctx.family {
        FamilyKind::Gaussian2d => gaussian_noise(x, WEAK_NOISE_SCALE, rng),
        FamilyKind::Icon8x8 => {
            let flipped = if rng.gen_bool(0.5) { icon_flip_h(x) } else { x.to_vec() };
            let dr = rng.gen_range(-1..=1);
            let dc = rng.gen_range(-1..=1);
            icon_shift(&flipped, dr, dc, ctx.fill())
        }
    }
}

/// Heavier augmentation: more noise plus coordinate dropout for gaussian2d;
/// weak + brightness jitter + cutout for icons. The cutout runs last so the
/// masked region equals the fill value exactly.
pub fn strong_augment(x: &[f64], ctx: &AugmentContext, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match ctx.family {
        FamilyKind::Gaussian2d => {
            let mut out = gaussian_noise(x, STRONG_NOISE_SCALE, rng);
            if rng.gen_bool(DROPOUT_PROB) {
                let i = rng.gen_range(0..out.len());
                out[i] = 0.0;
            }
            out
        }
        FamilyKind::Icon8x8 => {
            let weak = weak_augment(x, ctx, rng);
            let factor = 1.0 + JITTER_FRAC * (rng.gen::<f64>() * 2.0 - 1.0);
            let jittered = icon_brightness(&weak, factor, ctx);
            let top = rng.gen_range(0..=ICON_SIDE - CUTOUT_SIZE);
            let left = rng.gen_range(0..=ICON_SIDE - CUTOUT_SIZE);
            icon_cutout(&jittered, top, left, CUTOUT_SIZE, ctx.fill())
        }
    }
}

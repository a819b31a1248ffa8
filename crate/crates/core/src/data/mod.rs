//! Synthetic classification tasks with known ground truth, long-tailed
//! labeled/unlabeled splits, augmentation and minibatch streaming.

mod augment;
mod io;
mod longtail;
mod mixup;
mod stream;
mod synth;
mod task;

pub use augment::{
    gaussian_noise, icon_cutout, icon_flip_h, icon_shift, strong_augment, weak_augment,
    AugmentContext, CUTOUT_SIZE, DROPOUT_PROB, JITTER_FRAC, STRONG_NOISE_SCALE, WEAK_NOISE_SCALE,
};
pub use io::{export_csv, load_dataset, save_dataset};
pub use longtail::{longtail_counts, LongTailSpec, Pool};
pub use mixup::{mixup, mixup_with_lambda};
pub use stream::{BatchPair, BatchStream, ShuffleCycler};
pub use synth::{synthesize, DatasetHeader, SplitDataset};
pub use task::{FamilyKind, TaskFamily, TaskSpec, ICON_SIDE};

/// SplitMix64 finalizer, used to derive independent seed streams.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

//! Base semi-supervised losses (FixMatch- and ReMixMatch-style) and
//! pseudo-label post-processing.

mod losses;
mod pseudo;

pub use losses::{
    fixmatch_loss, remixmatch_loss, rotate_icon, rotation_views, supervised_loss, LossReport,
};
pub use pseudo::{
    confidence_mask, distribution_align, harden, harden_row, pseudo_label, sharpen, AlignState,
    ALIGN_WINDOW,
};

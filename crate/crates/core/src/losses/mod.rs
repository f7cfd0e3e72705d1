//! Auxiliary objectives on a `T x B` minibatch.
//!
//! Per-step tensors are laid out time-major: row `t * B + b` holds step `t`
//! of batch column `b`.

mod cpc;
mod pbl;
mod pixel_control;
mod report;
mod subsample;
mod targets;

pub use cpc::{cpc_loss, discriminator_accuracy, sample_negatives, CpcOutput};
pub use pbl::{
    pbl_forward_loss, pbl_reverse_loss, unroll_selected, valid_pair_mask, ForwardTerms, PairRow,
    PartialBatch, ReverseTerms,
};
pub use pixel_control::{pixel_control_loss, pseudo_rewards, PixelControlSpec};
pub use report::{LossEntry, LossReport, LossTerms};
pub use subsample::{sample_subsample_indices, SubsampleIndices};
pub use targets::{grounded_dual_targets, FrozenTargets};

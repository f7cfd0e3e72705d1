//! Building blocks for learning history representations with bootstrapped
//! latent predictions.
//!
//! * [`nn`]: MLPs, LSTMs, the multimodal observation encoder and the norm
//!   helpers used by the prediction losses.
//! * [`history`]: full-history and partial-history recurrent compression.
//! * [`losses`]: forward/reverse latent prediction, random-projection
//!   targets, contrastive predictive coding and pixel control.
//! * [`rl`]: reward transform, V-trace, PopArt, the actor-critic loss and
//!   Adam.
//! * [`probes`]: gradient-isolated position probes and collapse metrics.

mod error;
pub mod history;
pub mod losses;
pub mod nn;
pub mod probes;
pub mod rl;
pub mod rng;

pub use error::{Error, Result};

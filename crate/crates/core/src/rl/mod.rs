//! Actor-critic pieces: reward transform, V-trace, PopArt, the policy and
//! value losses, and Adam.

mod actor_critic;
mod adam;
mod popart;
mod reward;
mod vtrace;

pub use actor_critic::{actor_critic_loss, ActorCriticTerms, BASELINE_WEIGHT, ENTROPY_COST};
pub use adam::{Adam, OptimizerConfig};
pub use popart::{PopArt, PopArtConfig};
pub use reward::transform_reward;
pub use vtrace::{vtrace, VTraceConfig, VTraceOutput};

//! Network building blocks over the autodiff tape.

mod checkpoint;
mod encoder;
mod lstm;
mod mlp;
mod norm;

pub use checkpoint::{Checkpoint, CHECKPOINT_HEADER};
pub use encoder::{action_one_hot, EncoderSpec, ObservationEncoder};
pub use lstm::{LayerState, Lstm, LstmSpec, RecurrentState, StateVars};
pub use mlp::{Linear, Mlp, MlpSpec};
pub use norm::{
    l2_normalize, l2_normalize_rows, unit_norm_penalty, unit_norm_penalty_rows, NORM_EPS,
    PENALTY_COEF,
};

use pebble_autodiff::{ParamId, ParamStore, Tensor};

use crate::Result;

pub(crate) fn add_param(
    store: &mut ParamStore,
    name: String,
    value: Tensor,
    frozen: bool,
) -> Result<ParamId> {
    Ok(if frozen {
        store.add_frozen(name, value)?
    } else {
        store.add(name, value)?
    })
}

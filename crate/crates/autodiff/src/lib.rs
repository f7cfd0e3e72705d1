//! Reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] walks the recorded nodes in reverse insertion order and
//! adds the gradient of a scalar root into the accumulators of a
//! [`ParamStore`]. Tapes are cheap and meant to be thrown away after each
//! pass.
//!
//! ```
//! use pebble_autodiff::{ParamStore, Tape, Tensor};
//!
//! let mut store = ParamStore::new();
//! let x = store.add("x", Tensor::scalar(3.0)).unwrap();
//! let mut tape = Tape::new();
//! let xv = tape.param(&store, x);
//! let y = tape.mul(xv, xv).unwrap();
//! tape.backward(y, &mut store).unwrap();
//! assert_eq!(store.grad(x).item(), 6.0);
//! ```

mod error;
mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use error::{AutodiffError, Result};
pub use gradcheck::{finite_diff_check, relative_error};
pub use params::{glorot_uniform, ParamId, ParamStore, Parameter};
pub use tape::{OpKind, Tape, Var};
pub use tensor::Tensor;

use crate::error::{AutodiffError, Result};
use crate::params::ParamStore;
use crate::tape::{Tape, Var};

/// `|a - n| / max(1, |a|, |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Compares tape gradients of a scalar function of `store` against central
/// differences, returning the worst relative error over every coordinate of
/// every parameter.
///
/// Anything meant to sit behind a stop-gradient must be computed outside
/// `f` and captured as a constant, otherwise the numeric side sees a path
/// the analytic side blocks. Parameter values are restored afterwards.
pub fn finite_diff_check<F>(store: &mut ParamStore, f: F, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(AutodiffError::Invalid(format!("step must be positive, got {step}")));
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let root = f(&mut tape, store)?;
        let v = tape.value(root);
        if !v.is_scalar() {
            return Err(AutodiffError::NonScalarRoot(v.shape().to_vec()));
        }
        Ok(v.item())
    };

    let mut tape = Tape::new();
    let root = f(&mut tape, store)?;
    let analytic = tape.param_gradients(root)?;
    let first = tape.value(root).item();
    let second = eval(store)?;
    if first.to_bits() != second.to_bits() {
        return Err(AutodiffError::NonDeterministic { first, second });
    }

    let mut worst = 0f64;
    for (id, grad) in analytic {
        for k in 0..grad.len() {
            let orig = store.value(id).data()[k];
            store.value_unchecked_mut(id).data_mut()[k] = orig + step;
            let plus = eval(store);
            store.value_unchecked_mut(id).data_mut()[k] = orig - step;
            let minus = eval(store);
            store.value_unchecked_mut(id).data_mut()[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * step);
            worst = worst.max(relative_error(grad.data()[k], numeric));
        }
    }
    Ok(worst)
}

use rand::seq::index::sample;
use rand::Rng;

use crate::{Error, Result};

/// Time indices shared by every batch column and future offsets shared by
/// every time index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsampleIndices {
    /// Distinct, sorted, each in `0..T-1` so at least `t + 1` is in range.
    pub times: Vec<usize>,
    /// Distinct, sorted, each in `1..=H`.
    pub offsets: Vec<usize>,
}

impl SubsampleIndices {
    /// Every valid time index and every offset.
    pub fn full(t_len: usize, horizon: usize) -> Self {
        Self {
            times: (0..t_len.saturating_sub(1)).collect(),
            offsets: (1..=horizon).collect(),
        }
    }

    pub fn max_offset(&self) -> usize {
        self.offsets.iter().copied().max().unwrap_or(0)
    }
}

/// Draws `n_time` time indices out of the `T - 1` that admit a future and
/// `n_future` offsets out of `1..=H`, both without replacement.
pub fn sample_subsample_indices<R: Rng + ?Sized>(
    rng: &mut R,
    t_len: usize,
    horizon: usize,
    n_time: usize,
    n_future: usize,
) -> Result<SubsampleIndices> {
    if horizon == 0 {
        return Err(Error::Invalid("prediction horizon must be at least 1".into()));
    }
    if t_len < 2 || n_time == 0 || n_time > t_len - 1 {
        return Err(Error::Invalid(format!(
            "cannot draw {n_time} time indices from an unroll of length {t_len}"
        )));
    }
    if n_future == 0 || n_future > horizon {
        return Err(Error::Invalid(format!(
            "cannot draw {n_future} future offsets with horizon {horizon}"
        )));
    }
    let mut times = sample(rng, t_len - 1, n_time).into_vec();
    times.sort_unstable();
    let mut offsets: Vec<usize> = sample(rng, horizon, n_future).into_iter().map(|k| k + 1).collect();
    offsets.sort_unstable();
    Ok(SubsampleIndices { times, offsets })
}

use pebble_autodiff::{ParamStore, Tape, Tensor, Var};

use super::SubsampleIndices;
use crate::history::HistoryModel;
use crate::nn::{l2_normalize_rows, unit_norm_penalty_rows, Mlp, StateVars};
use crate::{Error, Result};

/// One selected `(t, k, b)` triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairRow {
    pub t: usize,
    pub k: usize,
    pub b: usize,
}

/// `B_{t,k}` outputs for every selected `(t, k)` and batch column.
#[derive(Clone, Debug)]
pub struct PartialBatch {
    /// `[pairs, d_B]`, one row per entry of `rows`.
    pub outputs: Var,
    pub rows: Vec<PairRow>,
    pub batch: usize,
    pub t_len: usize,
}

impl PartialBatch {
    /// Row of `Z_{t+k}` in a time-major `[T * B, d_Z]` latent matrix.
    /// Out-of-range targets are clamped; their pairs are masked anyway.
    pub fn target_rows(&self) -> Vec<usize> {
        let last = self.t_len * self.batch - 1;
        self.rows
            .iter()
            .map(|r| ((r.t + r.k) * self.batch + r.b).min(last))
            .collect()
    }
}

/// 1 for pairs whose target lies inside the unroll and inside the same
/// episode, else 0. `resets[s][b]` marks step `s` as the first of a new
/// episode.
pub fn valid_pair_mask(rows: &[PairRow], resets: &[Vec<bool>]) -> Vec<f64> {
    let t_len = resets.len();
    rows.iter()
        .map(|r| {
            let inside = r.t + r.k < t_len;
            let same_episode = inside && (r.t + 1..=r.t + r.k).all(|s| !resets[s][r.b]);
            if same_episode {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Unrolls `h_p` from the agent state at every selected time index and
/// keeps the outputs at the selected offsets. `states[t]` is the `h_f`
/// state after consuming step `t`; `actions[t][b]` is `A_t`.
pub fn unroll_selected(
    tape: &mut Tape,
    store: &ParamStore,
    history: &HistoryModel,
    states: &[StateVars],
    actions: &[Vec<usize>],
    idx: &SubsampleIndices,
) -> Result<PartialBatch> {
    let t_len = states.len();
    if actions.len() != t_len {
        return Err(Error::Length {
            context: "agent states vs actions",
            a: t_len,
            b: actions.len(),
        });
    }
    if let Some(&t) = idx.times.iter().find(|&&t| t + 1 >= t_len.max(1)) {
        return Err(Error::Invalid(format!("time index {t} has no future in an unroll of {t_len}")));
    }
    let batch = actions.first().map_or(0, Vec::len);
    let base_parts: Vec<&StateVars> = idx.times.iter().map(|&t| &states[t]).collect();
    let base = StateVars::concat_rows(tape, &base_parts)?;
    let steps: Vec<Vec<usize>> = (0..idx.max_offset())
        .map(|j| {
            idx.times
                .iter()
                .flat_map(|&t| (0..batch).map(move |b| (t, b)))
                .map(|(t, b)| actions.get(t + j).map_or(0, |a| a[b]))
                .collect()
        })
        .collect();
    let unrolled = history.unroll_partial(tape, store, &base, &steps)?;
    let mut parts = Vec::with_capacity(idx.offsets.len());
    let mut rows = Vec::new();
    for &k in &idx.offsets {
        parts.push(unrolled[k - 1].1);
        for &t in &idx.times {
            for b in 0..batch {
                rows.push(PairRow { t, k, b });
            }
        }
    }
    let outputs = tape.concat(&parts, 0)?;
    Ok(PartialBatch {
        outputs,
        rows,
        batch,
        t_len,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ForwardTerms {
    pub loss: Var,
    pub regularizer: Var,
}

/// `|norm(g(B_{t,k})) - sg(norm(Z_{t+k}))|^2` summed over the valid pairs
/// and divided by the number of selected slots, so that averaging over
/// index draws recovers the full-enumeration loss. The regularizer is the
/// unit-norm penalty on `g(B_{t,k})` under the same reduction. `latents`
/// is `[T * B, d_Z]`; no gradient reaches it.
pub fn pbl_forward_loss(
    tape: &mut Tape,
    store: &ParamStore,
    g: &Mlp,
    partial: &PartialBatch,
    latents: Var,
    mask: &[f64],
) -> Result<ForwardTerms> {
    let m = partial.rows.len();
    if mask.len() != m {
        return Err(Error::Length {
            context: "pair mask",
            a: mask.len(),
            b: m,
        });
    }
    if !mask.iter().any(|&v| v > 0.0) {
        return Err(Error::EmptyIndexSet);
    }
    let z_rows = tape.value(latents).rows();
    if z_rows != partial.t_len * partial.batch {
        return Err(Error::Length {
            context: "latent rows vs unroll",
            a: z_rows,
            b: partial.t_len * partial.batch,
        });
    }
    let denom = m as f64;
    let pred = g.apply(tape, store, partial.outputs)?;
    let pred_n = l2_normalize_rows(tape, pred)?;
    let z = tape.stop_gradient(latents)?;
    let target = tape.gather_rows(z, partial.target_rows())?;
    let target = l2_normalize_rows(tape, target)?;
    let target = tape.stop_gradient(target)?;
    let mask = tape.constant(Tensor::matrix(m, 1, mask.to_vec())?);

    let err = tape.squared_difference(pred_n, target)?;
    let err = tape.sum_rows(err)?;
    let err = tape.mul(err, mask)?;
    let loss = tape.sum(err)?;
    let loss = tape.scale(loss, 1.0 / denom)?;

    let pen = unit_norm_penalty_rows(tape, pred)?;
    let pen = tape.mul(pen, mask)?;
    let regularizer = tape.sum(pen)?;
    let regularizer = tape.scale(regularizer, 1.0 / denom)?;
    Ok(ForwardTerms { loss, regularizer })
}

#[derive(Clone, Copy, Debug)]
pub struct ReverseTerms {
    pub loss: Var,
    pub regularizer: Var,
}

/// `|g'(norm(Z_t)) - sg(B_t)|^2` averaged over every row, plus the
/// unit-norm penalty on the raw latents. No gradient reaches `outputs`.
pub fn pbl_reverse_loss(
    tape: &mut Tape,
    store: &ParamStore,
    g_rev: &Mlp,
    latents: Var,
    outputs: Var,
) -> Result<ReverseTerms> {
    let (a, b) = (tape.value(latents).rows(), tape.value(outputs).rows());
    if a != b {
        return Err(Error::Length {
            context: "latents vs agent states",
            a,
            b,
        });
    }
    let z_n = l2_normalize_rows(tape, latents)?;
    let pred = g_rev.apply(tape, store, z_n)?;
    let target = tape.stop_gradient(outputs)?;
    let err = tape.squared_difference(pred, target)?;
    let err = tape.sum_rows(err)?;
    let loss = tape.mean(err)?;
    let pen = unit_norm_penalty_rows(tape, latents)?;
    let regularizer = tape.mean(pen)?;
    Ok(ReverseTerms { loss, regularizer })
}

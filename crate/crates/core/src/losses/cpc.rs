use pebble_autodiff::{ParamStore, Tape, Tensor, Var};
use rand::Rng;

use super::PartialBatch;
use crate::nn::Mlp;
use crate::{Error, Result};

/// `n` indices drawn uniformly with replacement from `0..population`,
/// never equal to `exclude`.
pub fn sample_negatives<R: Rng + ?Sized>(
    rng: &mut R,
    population: usize,
    exclude: usize,
    n: usize,
) -> Result<Vec<usize>> {
    if population < 2 {
        return Err(Error::Invalid(format!(
            "need at least two observations to draw negatives, got {population}"
        )));
    }
    Ok((0..n)
        .map(|_| {
            let r = rng.gen_range(0..population - 1);
            if r >= exclude {
                r + 1
            } else {
                r
            }
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct CpcOutput {
    pub loss: Var,
    /// Discriminator logits of valid positive pairs.
    pub positive_logits: Vec<f64>,
    /// Discriminator logits of negatives attached to valid pairs.
    pub negative_logits: Vec<f64>,
}

/// Binary cross-entropy of the discriminator `d(concat(B_{t,k}, f(O)))`:
/// label 1 for `O_{t+k}`, label 0 for each of `negatives` observations
/// drawn from the rest of the minibatch. Per pair the positive term and the
/// mean negative term carry equal weight; pairs are reduced like the
/// forward loss. `latents` come from the shared encoder and do carry
/// gradient.
#[allow(clippy::too_many_arguments)]
pub fn cpc_loss<R: Rng + ?Sized>(
    tape: &mut Tape,
    store: &ParamStore,
    d: &Mlp,
    partial: &PartialBatch,
    latents: Var,
    mask: &[f64],
    negatives: usize,
    rng: &mut R,
) -> Result<CpcOutput> {
    let m = partial.rows.len();
    if mask.len() != m {
        return Err(Error::Length {
            context: "pair mask",
            a: mask.len(),
            b: m,
        });
    }
    if negatives == 0 {
        return Err(Error::Invalid("CPC needs at least one negative".into()));
    }
    if !mask.iter().any(|&v| v > 0.0) {
        return Err(Error::EmptyIndexSet);
    }
    let population = tape.value(latents).rows();
    let positives = partial.target_rows();
    let mut neg_index = Vec::with_capacity(m * negatives);
    for &p in &positives {
        neg_index.extend(sample_negatives(rng, population, p, negatives)?);
    }
    let repeated: Vec<usize> = (0..m).flat_map(|i| std::iter::repeat(i).take(negatives)).collect();

    let z_pos = tape.gather_rows(latents, positives)?;
    let pos_in = tape.concat(&[partial.outputs, z_pos], 1)?;
    let pos_logits = d.apply(tape, store, pos_in)?;
    let b_neg = tape.gather_rows(partial.outputs, repeated.clone())?;
    let z_neg = tape.gather_rows(latents, neg_index)?;
    let neg_in = tape.concat(&[b_neg, z_neg], 1)?;
    let neg_logits = d.apply(tape, store, neg_in)?;

    let pos_loss = tape.sigmoid_cross_entropy(pos_logits, vec![1.0; m])?;
    let neg_loss = tape.sigmoid_cross_entropy(neg_logits, vec![0.0; m * negatives])?;
    let pos_mask = tape.constant(Tensor::matrix(m, 1, mask.to_vec())?);
    let neg_mask: Vec<f64> = repeated.iter().map(|&i| mask[i] / negatives as f64).collect();
    let neg_mask = tape.constant(Tensor::matrix(m * negatives, 1, neg_mask)?);
    let pos_loss = tape.mul(pos_loss, pos_mask)?;
    let neg_loss = tape.mul(neg_loss, neg_mask)?;
    let pos_sum = tape.sum(pos_loss)?;
    let neg_sum = tape.sum(neg_loss)?;
    let loss = tape.add(pos_sum, neg_sum)?;
    let loss = tape.scale(loss, 1.0 / m as f64)?;

    let positive_logits = (0..m)
        .filter(|&i| mask[i] > 0.0)
        .map(|i| tape.value(pos_logits).data()[i])
        .collect();
    let negative_logits = repeated
        .iter()
        .enumerate()
        .filter(|(_, &i)| mask[i] > 0.0)
        .map(|(j, _)| tape.value(neg_logits).data()[j])
        .collect();
    Ok(CpcOutput {
        loss,
        positive_logits,
        negative_logits,
    })
}

/// Mean of the accuracy on positives (logit > 0) and on negatives
/// (logit < 0).
pub fn discriminator_accuracy(positive_logits: &[f64], negative_logits: &[f64]) -> f64 {
    let rate = |xs: &[f64], f: fn(f64) -> bool| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().filter(|&&x| f(x)).count() as f64 / xs.len() as f64
        }
    };
    0.5 * (rate(positive_logits, |x| x > 0.0) + rate(negative_logits, |x| x < 0.0))
}

use pebble_autodiff::{ParamStore, Tape, Tensor, Var};

use crate::nn::Mlp;
use crate::{Error, Result};

/// Partition of the `channels x rays` view image into equal cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelControlSpec {
    pub image_rows: usize,
    pub image_cols: usize,
    pub cell_rows: usize,
    pub cell_cols: usize,
}

impl PixelControlSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cell_rows == 0
            || self.cell_cols == 0
            || self.image_rows % self.cell_rows != 0
            || self.image_cols % self.cell_cols != 0
        {
            return Err(Error::Invalid(format!(
                "a {}x{} view does not split into {}x{} cells",
                self.image_rows, self.image_cols, self.cell_rows, self.cell_cols
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.image_rows / self.cell_rows, self.image_cols / self.cell_cols)
    }

    pub fn cells(&self) -> usize {
        let (r, c) = self.grid();
        r * c
    }
}

/// Mean absolute intensity change per cell, cells in row-major order.
pub fn pseudo_rewards(spec: &PixelControlSpec, prev: &[f64], next: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.image_rows * spec.image_cols;
    if prev.len() != n || next.len() != n {
        return Err(Error::Width {
            context: "pixel-control view",
            expected: n,
            got: prev.len().max(next.len()),
        });
    }
    let (gr, gc) = spec.grid();
    let mut out = vec![0.0; gr * gc];
    for r in 0..spec.image_rows {
        for c in 0..spec.image_cols {
            let i = r * spec.image_cols + c;
            out[(r / spec.cell_rows) * gc + c / spec.cell_cols] += (next[i] - prev[i]).abs();
        }
    }
    let area = (spec.cell_rows * spec.cell_cols) as f64;
    out.iter_mut().for_each(|v| *v /= area);
    Ok(out)
}

/// n-step Q-learning on a head mapping `B_t` to `cells x actions` values.
///
/// `outputs` holds `(T + 1) * B` rows: the `T` steps plus the bootstrap
/// step. `rewards[t][b]` are the per-cell pseudo-rewards of the transition
/// taken at step `t`; `conts[t][b] == false` ends the return there. Targets
/// use the head's own values without gradient. The loss is the mean over
/// steps, batch and cells.
#[allow(clippy::too_many_arguments)]
pub fn pixel_control_loss(
    tape: &mut Tape,
    store: &ParamStore,
    head: &Mlp,
    outputs: Var,
    actions: &[Vec<usize>],
    rewards: &[Vec<Vec<f64>>],
    conts: &[Vec<bool>],
    n_steps: usize,
    gamma: f64,
    num_actions: usize,
) -> Result<Var> {
    let t_len = actions.len();
    let batch = actions.first().map_or(0, Vec::len);
    if rewards.len() != t_len || conts.len() != t_len {
        return Err(Error::Length {
            context: "pixel-control sequences",
            a: rewards.len().min(conts.len()),
            b: t_len,
        });
    }
    if n_steps == 0 {
        return Err(Error::Invalid("pixel control needs n >= 1".into()));
    }
    let rows = tape.value(outputs).rows();
    if rows != (t_len + 1) * batch {
        return Err(Error::Length {
            context: "pixel-control states",
            a: rows,
            b: (t_len + 1) * batch,
        });
    }
    let q = head.apply(tape, store, outputs)?;
    let width = tape.value(q).cols();
    if num_actions == 0 || width % num_actions != 0 {
        return Err(Error::Width {
            context: "pixel-control head",
            expected: num_actions,
            got: width,
        });
    }
    let cells = width / num_actions;
    let qv = tape.value(q).clone();
    let best = |row: usize, c: usize| {
        qv.row(row)[c * num_actions..(c + 1) * num_actions]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut targets = vec![0.0; t_len * batch * cells];
    for t in 0..t_len {
        for b in 0..batch {
            if rewards[t][b].len() != cells {
                return Err(Error::Width {
                    context: "pixel-control rewards",
                    expected: cells,
                    got: rewards[t][b].len(),
                });
            }
            for c in 0..cells {
                let mut ret = 0.0;
                let mut discount = 1.0;
                let mut bootstrap = None;
                for i in 0..n_steps {
                    let s = t + i;
                    ret += discount * rewards[s][b][c];
                    discount *= gamma;
                    if !conts[s][b] {
                        break;
                    }
                    if i + 1 == n_steps || s + 1 == t_len {
                        bootstrap = Some(s + 1);
                        break;
                    }
                }
                if let Some(s) = bootstrap {
                    ret += discount * best(s * batch + b, c);
                }
                targets[(t * batch + b) * cells + c] = ret;
            }
        }
    }

    let q_steps = tape.slice(q, 0, 0, t_len * batch)?;
    let mut picked = Vec::with_capacity(cells);
    for c in 0..cells {
        let cols = (0..t_len * batch)
            .map(|r| {
                let a = actions[r / batch][r % batch];
                if a >= num_actions {
                    Err(Error::ActionIndex {
                        index: a,
                        count: num_actions,
                    })
                } else {
                    Ok(c * num_actions + a)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        picked.push(tape.pick_columns(q_steps, cols)?);
    }
    let q_taken = tape.concat(&picked, 1)?;
    let target = tape.constant(Tensor::matrix(t_len * batch, cells, targets)?);
    let err = tape.squared_difference(q_taken, target)?;
    Ok(tape.mean(err)?)
}

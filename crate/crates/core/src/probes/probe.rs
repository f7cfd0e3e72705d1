use std::io::Write;

use pebble_autodiff::{ParamStore, Tape, Tensor, Var};
use rand::Rng;

use crate::nn::{Mlp, MlpSpec};
use crate::rl::{Adam, OptimizerConfig};
use crate::{Error, Result};

pub const PROBE_LEARNING_RATE: f64 = 1e-3;
/// Decay of the running input statistics.
pub const PROBE_NORM_DECAY: f64 = 0.99;
const NORM_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub grid: usize,
    pub learning_rate: f64,
}

impl ProbeSpec {
    pub fn cells(&self) -> usize {
        self.grid * self.grid
    }

    fn mlp(&self) -> MlpSpec {
        let mut widths = self.hidden.clone();
        widths.push(self.cells());
        MlpSpec::new(self.input, widths)
    }
}

/// Predictor from agent states to the object's grid cell. It owns its
/// parameters and optimizer; representation tensors only ever enter it
/// through a stop-gradient.
///
/// Inputs are standardized with running per-coordinate statistics
/// gathered by `train_step`, since agent states can vary on a scale far
/// below the probe's initialization.
#[derive(Clone, Debug)]
pub struct Probe {
    spec: ProbeSpec,
    pub store: ParamStore,
    mlp: Mlp,
    adam: Adam,
    input_mean: Vec<f64>,
    input_var: Vec<f64>,
    steps: u64,
}

impl Probe {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, spec: ProbeSpec) -> Result<Self> {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, rng, "probe", spec.mlp())?;
        let adam = Adam::new(OptimizerConfig {
            learning_rate: spec.learning_rate,
            ..OptimizerConfig::default()
        });
        Ok(Self {
            input_mean: vec![0.0; spec.input],
            input_var: vec![1.0; spec.input],
            spec,
            store,
            mlp,
            adam,
            steps: 0,
        })
    }

    pub fn spec(&self) -> &ProbeSpec {
        &self.spec
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    /// Running input mean and variance.
    pub fn normalizer(&self) -> (&[f64], &[f64]) {
        (&self.input_mean, &self.input_var)
    }

    pub fn set_normalizer(&mut self, mean: Vec<f64>, var: Vec<f64>) -> Result<()> {
        for (context, v) in [("probe input mean", &mean), ("probe input variance", &var)] {
            if v.len() != self.spec.input {
                return Err(Error::Width {
                    context,
                    expected: self.spec.input,
                    got: v.len(),
                });
            }
        }
        if var.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Invalid("probe input variance must be non-negative".into()));
        }
        self.input_mean = mean;
        self.input_var = var;
        Ok(())
    }

    fn standardize(&self, b: &Tensor) -> Result<Tensor> {
        let (rows, cols) = b.dims2();
        if cols != self.spec.input {
            return Err(Error::Width {
                context: "probe input",
                expected: self.spec.input,
                got: cols,
            });
        }
        let data = b
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let j = i % cols;
                (v - self.input_mean[j]) / (self.input_var[j] + NORM_EPSILON).sqrt()
            })
            .collect();
        Ok(Tensor::matrix(rows, cols, data)?)
    }

    /// Folds a batch into the running statistics; the first batch sets them.
    fn observe(&mut self, b: &Tensor) {
        let (rows, cols) = b.dims2();
        if rows == 0 {
            return;
        }
        let n = rows as f64;
        let decay = if self.steps == 0 { 0.0 } else { PROBE_NORM_DECAY };
        for j in 0..cols {
            let col = (0..rows).map(|r| b.data()[r * cols + j]);
            let mean = col.clone().sum::<f64>() / n;
            let var = col.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            self.input_mean[j] = decay * self.input_mean[j] + (1.0 - decay) * mean;
            self.input_var[j] = decay * self.input_var[j] + (1.0 - decay) * var;
        }
    }

    /// Per-row logits for states `b` recorded on an outside tape.
    pub fn logits_on(&self, tape: &mut Tape, b: Var) -> Result<Var> {
        let x = self.standardize(tape.value(b))?;
        let x = tape.constant(x);
        self.mlp.apply(tape, &self.store, x)
    }

    /// Mean softmax cross-entropy against `cells` on an outside tape.
    pub fn loss_on(&self, tape: &mut Tape, b: Var, cells: &[usize]) -> Result<Var> {
        let n = tape.value(b).rows();
        if cells.len() != n {
            return Err(Error::Length {
                context: "probe targets",
                a: cells.len(),
                b: n,
            });
        }
        if let Some(&c) = cells.iter().find(|&&c| c >= self.spec.cells()) {
            return Err(Error::Invalid(format!(
                "cell {c} out of range for a {0}x{0} grid",
                self.spec.grid
            )));
        }
        let logits = self.logits_on(tape, b)?;
        let logp = tape.log_softmax(logits)?;
        let picked = tape.pick_columns(logp, cells.to_vec())?;
        let mean = tape.mean(picked)?;
        Ok(tape.scale(mean, -1.0)?)
    }

    /// Cross-entropy without updating.
    pub fn loss(&self, b: &Tensor, cells: &[usize]) -> Result<f64> {
        let mut tape = Tape::new();
        let bv = tape.constant(b.clone());
        let l = self.loss_on(&mut tape, bv, cells)?;
        Ok(tape.value(l).item())
    }

    /// One optimizer step on `(b, cells)`; returns the loss before the step.
    pub fn train_step(&mut self, b: &Tensor, cells: &[usize]) -> Result<f64> {
        if b.cols() == self.spec.input {
            self.observe(b);
        }
        self.steps += 1;
        let mut tape = Tape::new();
        let bv = tape.constant(b.clone());
        let l = self.loss_on(&mut tape, bv, cells)?;
        self.store.zero_grads();
        tape.backward(l, &mut self.store)?;
        self.adam.step(&mut self.store)?;
        Ok(tape.value(l).item())
    }

    /// Cell probabilities for one state row, row-major over the grid.
    pub fn predict_grid(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bv = tape.constant(Tensor::matrix(1, b.len(), b.to_vec())?);
        let logits = self.logits_on(&mut tape, bv)?;
        let p = tape.softmax(logits)?;
        Ok(tape.value(p).data().to_vec())
    }
}

/// Plain-text graymap of a `grid x grid` probability map, scaled so the
/// most likely cell is white.
pub fn write_pgm<W: Write>(out: &mut W, probs: &[f64], grid: usize) -> Result<()> {
    if probs.len() != grid * grid {
        return Err(Error::Width {
            context: "graymap cells",
            expected: grid * grid,
            got: probs.len(),
        });
    }
    let max = probs.iter().copied().fold(0.0, f64::max);
    writeln!(out, "P2")?;
    writeln!(out, "{grid} {grid}")?;
    writeln!(out, "255")?;
    for row in probs.chunks(grid) {
        let px: Vec<String> = row
            .iter()
            .map(|&p| {
                let v = if max > 0.0 { (p / max * 255.0).round() } else { 0.0 };
                format!("{}", v as u8)
            })
            .collect();
        writeln!(out, "{}", px.join(" "))?;
    }
    Ok(())
}

use pebble_autodiff::{glorot_uniform, ParamId, ParamStore, Tape, Tensor, Var};
use rand::Rng;

use super::add_param;
use crate::{Error, Result};

/// Stacked LSTM. With `skip` every layer also sees the module input and the
/// module output is the concatenation of all layer outputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LstmSpec {
    pub input: usize,
    pub layers: Vec<usize>,
    pub skip: bool,
}

impl LstmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.layers.contains(&0) || self.input == 0 {
            return Err(Error::Invalid(format!(
                "LSTM needs a positive input and at least one positive layer width, got {} -> {:?}",
                self.input, self.layers
            )));
        }
        Ok(())
    }

    pub fn output_width(&self) -> usize {
        if self.skip {
            self.layers.iter().sum()
        } else {
            *self.layers.last().expect("validated spec")
        }
    }

    fn layer_input(&self, l: usize) -> usize {
        match (l, self.skip) {
            (0, _) => self.input,
            (_, true) => self.input + self.layers[l - 1],
            (_, false) => self.layers[l - 1],
        }
    }
}

/// Cell and hidden rows of one layer, `[batch, width]` each.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub cell: Tensor,
    pub hidden: Tensor,
}

/// Per-layer LSTM state for a batch of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState {
    pub layers: Vec<LayerState>,
}

impl RecurrentState {
    pub fn zeros(spec: &LstmSpec, rows: usize) -> Self {
        Self {
            layers: spec
                .layers
                .iter()
                .map(|&w| LayerState {
                    cell: Tensor::zeros(vec![rows, w]),
                    hidden: Tensor::zeros(vec![rows, w]),
                })
                .collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.layers.first().map_or(0, |l| l.cell.rows())
    }

    pub fn check(&self, spec: &LstmSpec) -> Result<()> {
        if self.layers.len() != spec.layers.len() {
            return Err(Error::Width {
                context: "recurrent state layer count",
                expected: spec.layers.len(),
                got: self.layers.len(),
            });
        }
        let rows = self.rows();
        for (l, &w) in self.layers.iter().zip(&spec.layers) {
            for t in [&l.cell, &l.hidden] {
                if t.cols() != w || t.rows() != rows {
                    return Err(Error::Width {
                        context: "recurrent state layer width",
                        expected: w,
                        got: t.cols(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Rows picked by `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let pick = |t: &Tensor| {
            let rows: Vec<Vec<f64>> = indices.iter().map(|&i| t.row(i).to_vec()).collect();
            Tensor::matrix(indices.len(), t.cols(), rows.concat()).expect("consistent widths")
        };
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LayerState {
                    cell: pick(&l.cell),
                    hidden: pick(&l.hidden),
                })
                .collect(),
        }
    }

    /// Overwrites row `i` with row `j` of `other`.
    pub fn set_row(&mut self, i: usize, other: &RecurrentState, j: usize) {
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            for (d, s) in [(&mut dst.cell, &src.cell), (&mut dst.hidden, &src.hidden)] {
                let w = d.cols();
                d.data_mut()[i * w..(i + 1) * w].copy_from_slice(s.row(j));
            }
        }
    }

    /// Zeroes row `i`.
    pub fn reset_row(&mut self, i: usize) {
        for l in &mut self.layers {
            for t in [&mut l.cell, &mut l.hidden] {
                let w = t.cols();
                t.data_mut()[i * w..(i + 1) * w].iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
}

/// LSTM state living on a tape.
#[derive(Clone, Debug)]
pub struct StateVars {
    /// `(cell, hidden)` per layer.
    pub layers: Vec<(Var, Var)>,
}

impl StateVars {
    pub fn constant(tape: &mut Tape, state: &RecurrentState) -> Self {
        Self {
            layers: state
                .layers
                .iter()
                .map(|l| (tape.constant(l.cell.clone()), tape.constant(l.hidden.clone())))
                .collect(),
        }
    }

    pub fn values(&self, tape: &Tape) -> RecurrentState {
        RecurrentState {
            layers: self
                .layers
                .iter()
                .map(|&(c, h)| LayerState {
                    cell: tape.value(c).clone(),
                    hidden: tape.value(h).clone(),
                })
                .collect(),
        }
    }

    pub fn rows(&self, tape: &Tape) -> usize {
        tape.value(self.layers[0].0).rows()
    }

    /// Multiplies every row by the matching entry of `keep` (a `[rows, 1]`
    /// column of zeros and ones).
    pub fn mask_rows(&self, tape: &mut Tape, keep: Var) -> Result<Self> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for &(c, h) in &self.layers {
            layers.push((tape.mul(c, keep)?, tape.mul(h, keep)?));
        }
        Ok(Self { layers })
    }

    pub fn gather_rows(&self, tape: &mut Tape, indices: &[usize]) -> Result<Self> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for &(c, h) in &self.layers {
            layers.push((
                tape.gather_rows(c, indices.to_vec())?,
                tape.gather_rows(h, indices.to_vec())?,
            ));
        }
        Ok(Self { layers })
    }

    /// Stacks the rows of several states.
    pub fn concat_rows(tape: &mut Tape, parts: &[&StateVars]) -> Result<Self> {
        let n = parts.first().map_or(0, |p| p.layers.len());
        let mut layers = Vec::with_capacity(n);
        for l in 0..n {
            let cells: Vec<Var> = parts.iter().map(|p| p.layers[l].0).collect();
            let hiddens: Vec<Var> = parts.iter().map(|p| p.layers[l].1).collect();
            layers.push((tape.concat(&cells, 0)?, tape.concat(&hiddens, 0)?));
        }
        Ok(Self { layers })
    }
}

#[derive(Clone, Debug)]
struct LstmLayer {
    weight: ParamId,
    bias: ParamId,
    hidden: usize,
}

/// Gate order inside the fused weight matrix: input, forget, candidate,
/// output.
#[derive(Clone, Debug)]
pub struct Lstm {
    spec: LstmSpec,
    layers: Vec<LstmLayer>,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, spec: LstmSpec) -> Result<Self> {
        Self::build(store, rng, name, spec, false)
    }

    pub fn build<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        spec: LstmSpec,
        frozen: bool,
    ) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::new();
        for (l, &h) in spec.layers.iter().enumerate() {
            let fan_in = spec.layer_input(l) + h;
            let weight = add_param(store, format!("{name}.l{l}.w"), glorot_uniform(rng, fan_in, 4 * h), frozen)?;
            let mut b = Tensor::zeros(vec![1, 4 * h]);
            b.data_mut()[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
            let bias = add_param(store, format!("{name}.l{l}.b"), b, frozen)?;
            layers.push(LstmLayer { weight, bias, hidden: h });
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &LstmSpec {
        &self.spec
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    pub fn zero_state(&self, tape: &mut Tape, rows: usize) -> StateVars {
        StateVars::constant(tape, &RecurrentState::zeros(&self.spec, rows))
    }

    /// One step for every row of `x`. Returns the new state and the module
    /// output.
    pub fn step(&self, tape: &mut Tape, store: &ParamStore, state: &StateVars, x: Var) -> Result<(StateVars, Var)> {
        let got = tape.value(x).cols();
        if got != self.spec.input {
            return Err(Error::Width {
                context: "lstm input",
                expected: self.spec.input,
                got,
            });
        }
        if state.layers.len() != self.layers.len() {
            return Err(Error::Width {
                context: "recurrent state layer count",
                expected: self.layers.len(),
                got: state.layers.len(),
            });
        }
        let mut new_layers = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut below: Option<Var> = None;
        for (layer, &(c_prev, h_prev)) in self.layers.iter().zip(&state.layers) {
            let width = tape.value(c_prev).cols();
            if width != layer.hidden || tape.value(h_prev).cols() != layer.hidden {
                return Err(Error::Width {
                    context: "recurrent state layer width",
                    expected: layer.hidden,
                    got: width,
                });
            }
            let input = match below {
                None => x,
                Some(h) if self.spec.skip => tape.concat(&[x, h], 1)?,
                Some(h) => h,
            };
            let joined = tape.concat(&[input, h_prev], 1)?;
            let w = tape.param(store, layer.weight);
            let b = tape.param(store, layer.bias);
            let z = tape.matmul(joined, w)?;
            let z = tape.add(z, b)?;
            let h = layer.hidden;
            let i = tape.slice(z, 1, 0, h)?;
            let f = tape.slice(z, 1, h, h)?;
            let g = tape.slice(z, 1, 2 * h, h)?;
            let o = tape.slice(z, 1, 3 * h, h)?;
            let i = tape.sigmoid(i)?;
            let f = tape.sigmoid(f)?;
            let g = tape.tanh(g)?;
            let o = tape.sigmoid(o)?;
            let keep = tape.mul(f, c_prev)?;
            let write = tape.mul(i, g)?;
            let c = tape.add(keep, write)?;
            let tc = tape.tanh(c)?;
            let h_new = tape.mul(o, tc)?;
            new_layers.push((c, h_new));
            outputs.push(h_new);
            below = Some(h_new);
        }
        let out = if self.spec.skip {
            tape.concat(&outputs, 1)?
        } else {
            *outputs.last().expect("at least one layer")
        };
        Ok((StateVars { layers: new_layers }, out))
    }

    /// Tape-free convenience wrapper around [`Lstm::step`].
    pub fn step_values(
        &self,
        store: &ParamStore,
        state: &RecurrentState,
        x: &Tensor,
    ) -> Result<(RecurrentState, Tensor)> {
        state.check(&self.spec)?;
        let mut tape = Tape::new();
        let sv = StateVars::constant(&mut tape, state);
        let xv = tape.constant(x.clone());
        let (next, out) = self.step(&mut tape, store, &sv, xv)?;
        Ok((next.values(&tape), tape.value(out).clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pebble_autodiff::finite_diff_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> LstmSpec {
        LstmSpec {
            input: 3,
            layers: vec![4, 5],
            skip: true,
        }
    }

    #[test]
    fn zero_weights_zero_state() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lstm = Lstm::new(&mut store, &mut rng, "h", spec()).unwrap();
        for id in lstm.params() {
            let shape = store.value(id).shape().to_vec();
            store.set_value(id, Tensor::zeros(shape)).unwrap();
        }
        let state = RecurrentState::zeros(lstm.spec(), 2);
        let x = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0]).unwrap();
        let (next, out) = lstm.step_values(&store, &state, &x).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert!(next.layers.iter().all(|l| l.cell.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn skip_output_width_is_sum() {
        let s = LstmSpec {
            input: 10,
            layers: vec![32, 32],
            skip: true,
        };
        assert_eq!(s.output_width(), 64);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lstm = Lstm::new(&mut store, &mut rng, "h", s.clone()).unwrap();
        let (_, out) = lstm
            .step_values(&store, &RecurrentState::zeros(&s, 3), &Tensor::zeros(vec![3, 10]))
            .unwrap();
        assert_eq!(out.shape(), &[3, 64]);
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lstm = Lstm::new(&mut store, &mut rng, "h", spec()).unwrap();
        let b = store.value(lstm.params()[1]).data().to_vec();
        assert_eq!(b, [vec![0.0; 4], vec![1.0; 4], vec![0.0; 8]].concat());
    }

    #[test]
    fn mismatched_state_is_an_error() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lstm = Lstm::new(&mut store, &mut rng, "h", spec()).unwrap();
        let wrong = LstmSpec {
            input: 3,
            layers: vec![4, 6],
            skip: true,
        };
        let res = lstm.step_values(&store, &RecurrentState::zeros(&wrong, 1), &Tensor::zeros(vec![1, 3]));
        assert!(matches!(res, Err(Error::Width { .. })));
    }

    #[test]
    fn three_chained_steps_match_finite_differences() {
        for trial in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
            let mut store = ParamStore::new();
            let skip = trial % 2 == 0;
            let lstm = Lstm::new(
                &mut store,
                &mut rng,
                "h",
                LstmSpec {
                    input: 3,
                    layers: vec![3, 2],
                    skip,
                },
            )
            .unwrap();
            let xs: Vec<Tensor> = (0..3)
                .map(|_| Tensor::matrix(2, 3, (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
                .collect();
            let err = finite_diff_check(
                &mut store,
                |tape, store| {
                    let mut s = lstm.zero_state(tape, 2);
                    let mut out = None;
                    for x in &xs {
                        let xv = tape.constant(x.clone());
                        let (n, o) = lstm.step(tape, store, &s, xv).map_err(Error::into_autodiff)?;
                        s = n;
                        out = Some(o);
                    }
                    let o = out.unwrap();
                    let sq = tape.mul(o, o)?;
                    tape.sum(sq)
                },
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "trial {trial}: {err}");
        }
    }

    #[test]
    fn row_editing() {
        let s = spec();
        let mut a = RecurrentState::zeros(&s, 2);
        let mut b = RecurrentState::zeros(&s, 1);
        b.layers[1].hidden.data_mut().iter_mut().for_each(|v| *v = 2.0);
        a.set_row(1, &b, 0);
        assert_eq!(a.layers[1].hidden.row(1), &[2.0; 5]);
        assert_eq!(a.layers[1].hidden.row(0), &[0.0; 5]);
        assert_eq!(a.select_rows(&[1]), b);
        a.reset_row(1);
        assert_eq!(a, RecurrentState::zeros(&s, 2));
    }
}

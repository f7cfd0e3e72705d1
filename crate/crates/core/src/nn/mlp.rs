use pebble_autodiff::{glorot_uniform, ParamId, ParamStore, Tape, Tensor, Var};
use rand::Rng;

use super::add_param;
use crate::{Error, Result};

/// Layer widths of a rectifier MLP with a linear output layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    pub input: usize,
    /// Hidden widths followed by the output width.
    pub widths: Vec<usize>,
}

impl MlpSpec {
    pub fn new(input: usize, widths: Vec<usize>) -> Self {
        Self { input, widths }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::Invalid("an MLP needs at least one layer".into()));
        }
        if self.input == 0 || self.widths.contains(&0) {
            return Err(Error::Invalid(format!("MLP widths must be positive: {} -> {:?}", self.input, self.widths)));
        }
        Ok(())
    }

    pub fn output(&self) -> usize {
        *self.widths.last().expect("validated spec")
    }
}

/// Affine map `x W + b` with `W: [in, out]` and `b: [1, out]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        input: usize,
        output: usize,
        frozen: bool,
    ) -> Result<Self> {
        let weight = add_param(store, format!("{name}.w"), glorot_uniform(rng, input, output), frozen)?;
        let bias = add_param(store, format!("{name}.b"), Tensor::zeros(vec![1, output]), frozen)?;
        Ok(Self {
            weight,
            bias,
            input,
            output,
        })
    }

    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let y = tape.matmul(x, w)?;
        Ok(tape.add(y, b)?)
    }
}

#[derive(Clone, Debug)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Linear>,
    relu_output: bool,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, spec: MlpSpec) -> Result<Self> {
        Self::build(store, rng, name, spec, false)
    }

    pub fn build<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        spec: MlpSpec,
        frozen: bool,
    ) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.widths.len());
        let mut fan_in = spec.input;
        for (i, &w) in spec.widths.iter().enumerate() {
            layers.push(Linear::new(store, rng, &format!("{name}.l{i}"), fan_in, w, frozen)?);
            fan_in = w;
        }
        Ok(Self {
            spec,
            layers,
            relu_output: false,
        })
    }

    /// Also rectify the last layer (used by the view encoder).
    pub fn with_output_relu(mut self) -> Self {
        self.relu_output = true;
        self
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let got = tape.value(x).cols();
        if got != self.spec.input {
            return Err(Error::Width {
                context: "mlp input",
                expected: self.spec.input,
                got,
            });
        }
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(tape, store, h)?;
            if i + 1 < self.layers.len() || self.relu_output {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }
}

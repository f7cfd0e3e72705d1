use std::collections::HashMap;

use rand::Rng;

use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    /// Accumulates across backward passes until [`ParamStore::zero_grads`].
    pub grad: Tensor,
    pub frozen: bool,
}

/// Named trainable arrays plus their gradient accumulators.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        self.insert(name.into(), value, false)
    }

    /// Registers a parameter that optimizers must never touch.
    pub fn add_frozen(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        self.insert(name.into(), value, true)
    }

    fn insert(&mut self, name: String, value: Tensor, frozen: bool) -> Result<ParamId> {
        if self.by_name.contains_key(&name) {
            return Err(AutodiffError::DuplicateParameter(name));
        }
        let id = ParamId(self.params.len());
        let grad = Tensor::zeros(value.shape().to_vec());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            value,
            grad,
            frozen,
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    /// Mutable gradient accumulator, for callers that rescale gradients
    /// between `backward` and the optimizer step.
    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].grad
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.params[id.0].frozen
    }

    /// Mutable access to a parameter value; refused for frozen parameters.
    pub fn value_mut(&mut self, id: ParamId) -> Result<&mut Tensor> {
        let p = &mut self.params[id.0];
        if p.frozen {
            return Err(AutodiffError::Frozen(p.name.clone()));
        }
        Ok(&mut p.value)
    }

    /// Replaces a value, keeping its shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let slot = self.value_mut(id)?;
        if slot.shape() != value.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "set_value",
                shapes: vec![slot.shape().to_vec(), value.shape().to_vec()],
            });
        }
        *slot = value;
        Ok(())
    }

    pub(crate) fn value_unchecked_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, grad: &[f64]) {
        let acc = self.params[id.0].grad.data_mut();
        for (a, g) in acc.iter_mut().zip(grad) {
            *a += g;
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Sum of squared gradient entries over the given parameters.
    pub fn grad_sq_norm(&self, ids: &[ParamId]) -> f64 {
        ids.iter()
            .flat_map(|id| self.params[id.0].grad.data())
            .map(|g| g * g)
            .sum()
    }
}

/// Weight matrix `[fan_in, fan_out]` drawn uniformly in
/// `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-limit..=limit))
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("shape matches data")
}

use std::collections::HashMap;

use crate::error::{AutodiffError, Result};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operations the tape knows how to differentiate.
///
/// Binary elementwise kinds (`Add`, `Sub`, `Mul`, `Div`) broadcast their
/// second operand when it is a `1xn` row, an `mx1` column or a single value.
/// Row-wise kinds (`Softmax`, `LogSoftmax`, `SumRows`, `L2NormalizeRows`)
/// treat each matrix row as an independent vector.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Tanh,
    Sigmoid,
    Relu,
    Exp,
    Log,
    Concat { axis: usize },
    Slice { axis: usize, start: usize, len: usize },
    /// Row `r` of the output is row `indices[r]` of the input.
    GatherRows(Vec<usize>),
    /// `out[i, 0] = x[i, indices[i]]`.
    PickColumns(Vec<usize>),
    Sum,
    Mean,
    SumRows,
    SquaredDifference,
    Softmax,
    LogSoftmax,
    Scale(f64),
    AddScalar(f64),
    StopGradient,
    /// `v / (|v|_2 + 1e-8)` per row.
    L2NormalizeRows,
    /// Elementwise binary cross-entropy of logits against fixed labels.
    SigmoidCrossEntropy(Vec<f64>),
}

impl OpKind {
    fn name(&self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Tanh => "tanh",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Relu => "relu",
            OpKind::Exp => "exp",
            OpKind::Log => "log",
            OpKind::Concat { .. } => "concat",
            OpKind::Slice { .. } => "slice",
            OpKind::GatherRows(_) => "gather_rows",
            OpKind::PickColumns(_) => "pick_columns",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::SumRows => "sum_rows",
            OpKind::SquaredDifference => "squared_difference",
            OpKind::Softmax => "softmax",
            OpKind::LogSoftmax => "log_softmax",
            OpKind::Scale(_) => "scale",
            OpKind::AddScalar(_) => "add_scalar",
            OpKind::StopGradient => "stop_gradient",
            OpKind::L2NormalizeRows => "l2_normalize_rows",
            OpKind::SigmoidCrossEntropy(_) => "sigmoid_cross_entropy",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            OpKind::MatMul
            | OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::Div
            | OpKind::SquaredDifference => Some(2),
            OpKind::Concat { .. } => None,
            _ => Some(1),
        }
    }
}

pub(crate) const NORM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Col,
    Scalar,
}

impl Broadcast {
    #[inline]
    fn index(self, i: usize, j: usize, n: usize) -> usize {
        match self {
            Broadcast::Same => i * n + j,
            Broadcast::Row => j,
            Broadcast::Col => i,
            Broadcast::Scalar => 0,
        }
    }
}

#[derive(Clone, Debug)]
enum Source {
    Constant,
    Param,
    Op(OpKind, Vec<Var>),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    source: Source,
    requires_grad: bool,
}

/// Append-only record of one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Per-node gradients of one backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `v`, or `None` when no path reaches it.
    pub fn wrt(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::new(self.shapes[v.0].clone(), g.clone()).expect("shape recorded"))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Source::Constant, false)
    }

    /// Leaf for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Source::Param, true);
        self.params.insert(id, v);
        v
    }

    fn push(&mut self, value: Tensor, source: Source, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            source,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Evaluates `kind` on `inputs` and appends the result.
    pub fn record(&mut self, kind: OpKind, inputs: &[Var]) -> Result<Var> {
        if let Some(n) = kind.arity() {
            if inputs.len() != n {
                return Err(AutodiffError::Invalid(format!(
                    "{} expects {n} inputs, got {}",
                    kind.name(),
                    inputs.len()
                )));
            }
        } else if inputs.is_empty() {
            return Err(AutodiffError::Invalid(format!(
                "{} needs at least one input",
                kind.name()
            )));
        }
        let value = self.forward(&kind, inputs)?;
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: kind.name() });
        }
        let requires_grad = !matches!(kind, OpKind::StopGradient)
            && inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(value, Source::Op(kind, inputs.to_vec()), requires_grad))
    }

    fn mismatch(&self, kind: &OpKind, inputs: &[Var]) -> AutodiffError {
        AutodiffError::ShapeMismatch {
            op: kind.name(),
            shapes: inputs
                .iter()
                .map(|v| self.nodes[v.0].value.shape().to_vec())
                .collect(),
        }
    }

    fn broadcast(&self, kind: &OpKind, a: Var, b: Var) -> Result<Broadcast> {
        let (m, n) = self.value(a).dims2();
        match self.value(b).dims2() {
            (p, q) if p == m && q == n => Ok(Broadcast::Same),
            (1, q) if q == n => Ok(Broadcast::Row),
            (p, 1) if p == m => Ok(Broadcast::Col),
            (1, 1) => Ok(Broadcast::Scalar),
            _ => Err(self.mismatch(kind, &[a, b])),
        }
    }

    fn forward(&self, kind: &OpKind, inputs: &[Var]) -> Result<Tensor> {
        let x = self.value(inputs[0]);
        let out = match kind {
            OpKind::MatMul => {
                let b = self.value(inputs[1]);
                let (m, k) = x.dims2();
                let (k2, n) = b.dims2();
                if k != k2 || b.shape().len() != 2 {
                    return Err(self.mismatch(kind, inputs));
                }
                let mut out = vec![0.0; m * n];
                let (ad, bd) = (x.data(), b.data());
                for i in 0..m {
                    let orow = &mut out[i * n..(i + 1) * n];
                    for p in 0..k {
                        let av = ad[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        let brow = &bd[p * n..(p + 1) * n];
                        for (o, bv) in orow.iter_mut().zip(brow) {
                            *o += av * bv;
                        }
                    }
                }
                Tensor::new(vec![m, n], out)?
            }
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div => {
                let bc = self.broadcast(kind, inputs[0], inputs[1])?;
                let b = self.value(inputs[1]).data();
                let (m, n) = x.dims2();
                let ad = x.data();
                let mut out = Vec::with_capacity(m * n);
                for i in 0..m {
                    for j in 0..n {
                        let av = ad[i * n + j];
                        let bv = b[bc.index(i, j, n)];
                        out.push(match kind {
                            OpKind::Add => av + bv,
                            OpKind::Sub => av - bv,
                            OpKind::Mul => av * bv,
                            _ => av / bv,
                        });
                    }
                }
                Tensor::new(x.shape().to_vec(), out)?
            }
            OpKind::SquaredDifference => {
                let b = self.value(inputs[1]);
                if x.shape() != b.shape() {
                    return Err(self.mismatch(kind, inputs));
                }
                let d = x
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(a, b)| (a - b) * (a - b))
                    .collect();
                Tensor::new(x.shape().to_vec(), d)?
            }
            OpKind::Tanh => x.map(f64::tanh),
            OpKind::Sigmoid => x.map(sigmoid),
            OpKind::Relu => x.map(|v| v.max(0.0)),
            OpKind::Exp => x.map(f64::exp),
            OpKind::Log => x.map(f64::ln),
            OpKind::Scale(c) => x.map(|v| v * c),
            OpKind::AddScalar(c) => x.map(|v| v + c),
            OpKind::StopGradient => x.clone(),
            OpKind::Concat { axis } => self.concat_forward(kind, *axis, inputs)?,
            OpKind::Slice { axis, start, len } => {
                let (m, n) = x.dims2();
                let axis2 = self.axis2(kind, inputs[0], *axis)?;
                let extent = if axis2 == 0 { m } else { n };
                if start + len > extent {
                    return Err(self.mismatch(kind, inputs));
                }
                if axis2 == 0 {
                    let d = x.data()[start * n..(start + len) * n].to_vec();
                    Tensor::new(vec![*len, n], d)?
                } else {
                    let mut d = Vec::with_capacity(m * len);
                    for i in 0..m {
                        d.extend_from_slice(&x.data()[i * n + start..i * n + start + len]);
                    }
                    let shape = if x.shape().len() == 2 {
                        vec![m, *len]
                    } else {
                        vec![*len]
                    };
                    Tensor::new(shape, d)?
                }
            }
            OpKind::GatherRows(idx) => {
                let (m, n) = x.dims2();
                if idx.iter().any(|&r| r >= m) {
                    return Err(AutodiffError::Invalid(format!(
                        "gather_rows: index out of range for {m} rows"
                    )));
                }
                let mut d = Vec::with_capacity(idx.len() * n);
                for &r in idx {
                    d.extend_from_slice(x.row(r));
                }
                Tensor::new(vec![idx.len(), n], d)?
            }
            OpKind::PickColumns(idx) => {
                let (m, n) = x.dims2();
                if idx.len() != m || idx.iter().any(|&c| c >= n) {
                    return Err(AutodiffError::Invalid(format!(
                        "pick_columns: {} indices for shape {:?}",
                        idx.len(),
                        x.shape()
                    )));
                }
                let d = idx.iter().enumerate().map(|(i, &c)| x.data()[i * n + c]).collect();
                Tensor::new(vec![m, 1], d)?
            }
            OpKind::Sum => Tensor::scalar(x.data().iter().sum()),
            OpKind::Mean => {
                if x.is_empty() {
                    return Err(self.mismatch(kind, inputs));
                }
                Tensor::scalar(x.data().iter().sum::<f64>() / x.len() as f64)
            }
            OpKind::SumRows => {
                let (m, n) = x.dims2();
                let d = (0..m).map(|i| x.data()[i * n..(i + 1) * n].iter().sum()).collect();
                Tensor::new(vec![m, 1], d)?
            }
            OpKind::Softmax | OpKind::LogSoftmax => {
                let (m, n) = x.dims2();
                let mut d = Vec::with_capacity(m * n);
                for i in 0..m {
                    let row = x.row(i);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
                    if matches!(kind, OpKind::Softmax) {
                        d.extend(row.iter().map(|v| (v - max).exp() / z));
                    } else {
                        let lz = max + z.ln();
                        d.extend(row.iter().map(|v| v - lz));
                    }
                }
                Tensor::new(x.shape().to_vec(), d)?
            }
            OpKind::L2NormalizeRows => {
                let (m, n) = x.dims2();
                let mut d = Vec::with_capacity(m * n);
                for i in 0..m {
                    let row = x.row(i);
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    d.extend(row.iter().map(|v| v / (norm + NORM_EPS)));
                }
                Tensor::new(x.shape().to_vec(), d)?
            }
            OpKind::SigmoidCrossEntropy(labels) => {
                if labels.len() != x.len() {
                    return Err(AutodiffError::Invalid(format!(
                        "sigmoid_cross_entropy: {} labels for {} logits",
                        labels.len(),
                        x.len()
                    )));
                }
                let d = x
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
                    .collect();
                Tensor::new(x.shape().to_vec(), d)?
            }
        };
        Ok(out)
    }

    /// Maps a user axis onto the matrix view: axis 0 of a rank-1 tensor is
    /// its columns.
    fn axis2(&self, kind: &OpKind, v: Var, axis: usize) -> Result<usize> {
        match (self.value(v).shape().len(), axis) {
            (0 | 1, 0) => Ok(1),
            (2, 0 | 1) => Ok(axis),
            _ => Err(self.mismatch(kind, &[v])),
        }
    }

    fn concat_forward(&self, kind: &OpKind, axis: usize, inputs: &[Var]) -> Result<Tensor> {
        let rank = self.value(inputs[0]).shape().len();
        let axis2 = self.axis2(kind, inputs[0], axis)?;
        if inputs
            .iter()
            .any(|v| self.value(*v).shape().len().max(1) != rank.max(1))
        {
            return Err(self.mismatch(kind, inputs));
        }
        let (m0, n0) = self.value(inputs[0]).dims2();
        if axis2 == 0 {
            if inputs.iter().any(|v| self.value(*v).cols() != n0) {
                return Err(self.mismatch(kind, inputs));
            }
            let mut d = Vec::new();
            let mut rows = 0;
            for v in inputs {
                d.extend_from_slice(self.value(*v).data());
                rows += self.value(*v).rows();
            }
            Tensor::new(vec![rows, n0], d)
        } else {
            if inputs.iter().any(|v| self.value(*v).rows() != m0) {
                return Err(self.mismatch(kind, inputs));
            }
            let n: usize = inputs.iter().map(|v| self.value(*v).cols()).sum();
            let mut d = Vec::with_capacity(m0 * n);
            for i in 0..m0 {
                for v in inputs {
                    d.extend_from_slice(self.value(*v).row(i));
                }
            }
            let shape = if rank == 2 { vec![m0, n] } else { vec![n] };
            Tensor::new(shape, d)
        }
    }

    /// Gradients of a scalar `root` with respect to every node.
    pub fn gradients(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if !root_value.is_scalar() {
            return Err(AutodiffError::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Source::Op(kind, inputs) = &node.source else {
                continue;
            };
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backward_node(kind, inputs, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    /// Gradient of `root` for each parameter leaf on this tape.
    pub fn param_gradients(&self, root: Var) -> Result<Vec<(ParamId, Tensor)>> {
        let grads = self.gradients(root)?;
        let mut out: Vec<(ParamId, Tensor)> = self
            .params
            .iter()
            .map(|(&id, &v)| {
                let g = grads
                    .wrt(v)
                    .unwrap_or_else(|| Tensor::zeros(self.value(v).shape().to_vec()));
                (id, g)
            })
            .collect();
        out.sort_by_key(|(id, _)| *id);
        Ok(out)
    }

    /// Adds d(root)/d(parameter) into the store's accumulators.
    pub fn backward(&self, root: Var, store: &mut ParamStore) -> Result<()> {
        let grads = self.gradients(root)?;
        let mut leaves: Vec<_> = self.params.iter().collect();
        leaves.sort_by_key(|(id, _)| **id);
        for (&id, &v) in leaves {
            if let Some(g) = &grads.grads[v.0] {
                store.accumulate(id, g);
            }
        }
        Ok(())
    }

    fn backward_node(
        &self,
        kind: &OpKind,
        inputs: &[Var],
        out: &Tensor,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
    ) {
        let x = self.value(inputs[0]);
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        match kind {
            OpKind::StopGradient => {}
            OpKind::MatMul => {
                let b = self.value(inputs[1]);
                let (m, k) = x.dims2();
                let n = b.cols();
                let (ad, bd) = (x.data(), b.data());
                if wants(inputs[0]) {
                    let ga = slot(grads, inputs[0], m * k);
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            ga[i * k + p] += dot(grow, brow);
                        }
                    }
                }
                if wants(inputs[1]) {
                    let gb = slot(grads, inputs[1], k * n);
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let av = ad[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for (o, gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += av * gv;
                            }
                        }
                    }
                }
            }
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div => {
                let bc = self
                    .broadcast(kind, inputs[0], inputs[1])
                    .expect("validated in forward");
                let bt = self.value(inputs[1]);
                let (m, n) = x.dims2();
                let (ad, bd) = (x.data(), bt.data());
                if wants(inputs[0]) {
                    let mut ga = vec![0.0; m * n];
                    for i in 0..m {
                        for j in 0..n {
                            let k = i * n + j;
                            let bv = bd[bc.index(i, j, n)];
                            ga[k] = match kind {
                                OpKind::Add | OpKind::Sub => g[k],
                                OpKind::Mul => g[k] * bv,
                                _ => g[k] / bv,
                            };
                        }
                    }
                    add_into(slot(grads, inputs[0], m * n), &ga);
                }
                if wants(inputs[1]) {
                    let mut gb = vec![0.0; bt.len()];
                    for i in 0..m {
                        for j in 0..n {
                            let k = i * n + j;
                            let bi = bc.index(i, j, n);
                            let bv = bd[bi];
                            gb[bi] += match kind {
                                OpKind::Add => g[k],
                                OpKind::Sub => -g[k],
                                OpKind::Mul => g[k] * ad[k],
                                _ => -g[k] * ad[k] / (bv * bv),
                            };
                        }
                    }
                    add_into(slot(grads, inputs[1], bt.len()), &gb);
                }
            }
            OpKind::SquaredDifference => {
                let b = self.value(inputs[1]);
                let d: Vec<f64> = x
                    .data()
                    .iter()
                    .zip(b.data())
                    .zip(g)
                    .map(|((a, b), g)| 2.0 * (a - b) * g)
                    .collect();
                if wants(inputs[0]) {
                    add_into(slot(grads, inputs[0], d.len()), &d);
                }
                if wants(inputs[1]) {
                    let s = slot(grads, inputs[1], d.len());
                    for (o, v) in s.iter_mut().zip(&d) {
                        *o -= v;
                    }
                }
            }
            _ => {
                if !wants(inputs[0]) && !matches!(kind, OpKind::Concat { .. }) {
                    return;
                }
                self.backward_unary(kind, inputs, out, g, grads);
            }
        }
    }

    fn backward_unary(
        &self,
        kind: &OpKind,
        inputs: &[Var],
        out: &Tensor,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
    ) {
        let x = self.value(inputs[0]);
        let xd = x.data();
        let od = out.data();
        let (m, n) = x.dims2();
        let elementwise = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..xd.len()).map(f).collect() };
        let local: Vec<f64> = match kind {
            OpKind::Tanh => elementwise(&|k| g[k] * (1.0 - od[k] * od[k])),
            OpKind::Sigmoid => elementwise(&|k| g[k] * od[k] * (1.0 - od[k])),
            OpKind::Relu => elementwise(&|k| if xd[k] > 0.0 { g[k] } else { 0.0 }),
            OpKind::Exp => elementwise(&|k| g[k] * od[k]),
            OpKind::Log => elementwise(&|k| g[k] / xd[k]),
            OpKind::Scale(c) => elementwise(&|k| g[k] * c),
            OpKind::AddScalar(_) => g.to_vec(),
            OpKind::Sum => elementwise(&|_| g[0]),
            OpKind::Mean => {
                let s = g[0] / xd.len() as f64;
                elementwise(&|_| s)
            }
            OpKind::SumRows => elementwise(&|k| g[k / n]),
            OpKind::Softmax => {
                let mut d = vec![0.0; m * n];
                for i in 0..m {
                    let r = i * n..(i + 1) * n;
                    let s = dot(&g[r.clone()], &od[r.clone()]);
                    for k in r {
                        d[k] = od[k] * (g[k] - s);
                    }
                }
                d
            }
            OpKind::LogSoftmax => {
                let mut d = vec![0.0; m * n];
                for i in 0..m {
                    let r = i * n..(i + 1) * n;
                    let s: f64 = g[r.clone()].iter().sum();
                    for k in r {
                        d[k] = g[k] - od[k].exp() * s;
                    }
                }
                d
            }
            OpKind::L2NormalizeRows => {
                let mut d = vec![0.0; m * n];
                for i in 0..m {
                    let r = i * n..(i + 1) * n;
                    let row = &xd[r.clone()];
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let denom = norm + NORM_EPS;
                    let proj = if norm > 0.0 {
                        dot(&g[r.clone()], row) / (norm * denom * denom)
                    } else {
                        0.0
                    };
                    for k in r {
                        d[k] = g[k] / denom - xd[k] * proj;
                    }
                }
                d
            }
            OpKind::SigmoidCrossEntropy(labels) => {
                elementwise(&|k| g[k] * (sigmoid(xd[k]) - labels[k]))
            }
            OpKind::PickColumns(idx) => {
                let mut d = vec![0.0; m * n];
                for (i, &c) in idx.iter().enumerate() {
                    d[i * n + c] = g[i];
                }
                d
            }
            OpKind::GatherRows(idx) => {
                let mut d = vec![0.0; m * n];
                for (r, &src) in idx.iter().enumerate() {
                    for j in 0..n {
                        d[src * n + j] += g[r * n + j];
                    }
                }
                d
            }
            OpKind::Slice { axis, start, len } => {
                let axis2 = self.axis2(kind, inputs[0], *axis).expect("validated");
                let mut d = vec![0.0; m * n];
                if axis2 == 0 {
                    d[start * n..(start + len) * n].copy_from_slice(g);
                } else {
                    for i in 0..m {
                        d[i * n + start..i * n + start + len]
                            .copy_from_slice(&g[i * len..(i + 1) * len]);
                    }
                }
                d
            }
            OpKind::Concat { axis } => {
                let axis2 = self.axis2(kind, inputs[0], *axis).expect("validated");
                let total_cols = out.cols();
                let mut offset = 0;
                for &v in inputs {
                    let (vm, vn) = self.value(v).dims2();
                    if self.nodes[v.0].requires_grad {
                        let mut d = vec![0.0; vm * vn];
                        if axis2 == 0 {
                            d.copy_from_slice(&g[offset * vn..(offset + vm) * vn]);
                        } else {
                            for i in 0..vm {
                                let src = i * total_cols + offset;
                                d[i * vn..(i + 1) * vn].copy_from_slice(&g[src..src + vn]);
                            }
                        }
                        add_into(slot(grads, v, vm * vn), &d);
                    }
                    offset += if axis2 == 0 { vm } else { vn };
                }
                return;
            }
            _ => unreachable!("handled by backward_node"),
        };
        add_into(slot(grads, inputs[0], local.len()), &local);
    }

    // Convenience wrappers over `record`.

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::Mul, &[a, b])
    }
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::Div, &[a, b])
    }
    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::Tanh, &[x])
    }
    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::Sigmoid, &[x])
    }
    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::Relu, &[x])
    }
    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::Exp, &[x])
    }
    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::Log, &[x])
    }
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        self.record(OpKind::Concat { axis }, parts)
    }
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.record(OpKind::Slice { axis, start, len }, &[x])
    }
    pub fn gather_rows(&mut self, x: Var, indices: Vec<usize>) -> Result<Var> {
        self.record(OpKind::GatherRows(indices), &[x])
    }
    pub fn pick_columns(&mut self, x: Var, indices: Vec<usize>) -> Result<Var> {
        self.record(OpKind::PickColumns(indices), &[x])
    }
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::Sum, &[x])
    }
    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::Mean, &[x])
    }
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::SumRows, &[x])
    }
    pub fn squared_difference(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::SquaredDifference, &[a, b])
    }
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::Softmax, &[x])
    }
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::LogSoftmax, &[x])
    }
    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.record(OpKind::Scale(c), &[x])
    }
    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        self.record(OpKind::AddScalar(c), &[x])
    }
    /// Forward identity that blocks every gradient path through `x`.
    pub fn stop_gradient(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::StopGradient, &[x])
    }
    pub fn l2_normalize_rows(&mut self, x: Var) -> Result<Var> {
        self.record(OpKind::L2NormalizeRows, &[x])
    }
    pub fn sigmoid_cross_entropy(&mut self, logits: Var, labels: Vec<f64>) -> Result<Var> {
        self.record(OpKind::SigmoidCrossEntropy(labels), &[logits])
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

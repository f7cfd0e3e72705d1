//! Finite-difference checks of every tape primitive. Each entry reports
//! the worst relative error over `TRIALS` random instances.

use pebble_autodiff::{finite_diff_check, glorot_uniform, OpKind, ParamId, ParamStore, Result, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
pub const TRIALS: u64 = 20;

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Runs `build` on a random `x` (and `y` of the same shape) and reduces the
/// result with a random weighting so every output coordinate matters.
fn check_op(positive: bool, build: impl Fn(&mut Tape, Var, Var) -> Result<Var>) -> f64 {
    let mut worst: f64 = 0.0;
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let (m, n) = (rng.gen_range(1..4), rng.gen_range(2..5));
        let mut store = ParamStore::new();
        let mut x = random_matrix(&mut rng, m, n, 1.5);
        if positive {
            x = x.map(|v| v.abs() + 0.2);
        }
        let xs = store.add("x", x).unwrap();
        let ys = store.add("y", random_matrix(&mut rng, m, n, 1.5).map(|v| v.abs() + 0.3)).unwrap();
        let err = finite_diff_check(
            &mut store,
            |tape, store| {
                let x = tape.param(store, xs);
                let y = tape.param(store, ys);
                let out = build(tape, x, y)?;
                let shape = tape.value(out).shape().to_vec();
                let n: usize = shape.iter().product();
                let mut wrng = ChaCha8Rng::seed_from_u64(1000 + trial);
                let w = (0..n).map(|_| wrng.gen_range(-1.0..1.0)).collect();
                let w = tape.constant(Tensor::new(shape, w).unwrap());
                let p = tape.mul(out, w)?;
                tape.sum(p)
            },
            STEP,
        )
        .unwrap();
        worst = worst.max(err);
    }
    worst
}

/// Worst relative error of every primitive over `TRIALS` random inputs.
pub fn run_all() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    out.push(("add", check_op(false, |t, x, y| t.add(x, y))));
    out.push(("sub", check_op(false, |t, x, y| t.sub(x, y))));
    out.push(("mul", check_op(false, |t, x, y| t.mul(x, y))));
    out.push(("div", check_op(false, |t, x, y| t.div(x, y))));
    out.push(("tanh", check_op(false, |t, x, _| t.tanh(x))));
    out.push(("sigmoid", check_op(false, |t, x, _| t.sigmoid(x))));
    out.push(("relu", check_op(false, |t, x, _| t.relu(x))));
    out.push(("exp", check_op(false, |t, x, _| t.exp(x))));
    out.push(("log", check_op(true, |t, x, _| t.log(x))));
    out.push(("scale", check_op(false, |t, x, _| t.scale(x, -2.5))));
    out.push(("add_scalar", check_op(false, |t, x, _| t.add_scalar(x, 0.7))));
    out.push(("squared_difference", check_op(false, |t, x, y| t.squared_difference(x, y))));
    out.push(("row broadcast", check_op(false, |t, x, y| {
        let row = t.slice(y, 0, 0, 1)?;
        t.mul(x, row)
    })));
    out.push(("column broadcast", check_op(false, |t, x, y| {
        let col = t.slice(y, 1, 0, 1)?;
        t.div(x, col)
    })));
    out.push(("sum", check_op(false, |t, x, _| t.sum(x))));
    out.push(("mean", check_op(false, |t, x, _| t.mean(x))));
    out.push(("sum_rows", check_op(false, |t, x, _| t.sum_rows(x))));
    out.push(("softmax", check_op(false, |t, x, _| t.softmax(x))));
    out.push(("log_softmax", check_op(false, |t, x, _| t.log_softmax(x))));
    out.push(("l2_normalize_rows", check_op(false, |t, x, _| t.l2_normalize_rows(x))));
    out.push(("sigmoid_cross_entropy", check_op(false, |t, x, _| {
        let n = t.value(x).len();
        let labels = (0..n).map(|i| (i % 2) as f64).collect();
        t.sigmoid_cross_entropy(x, labels)
    })));
    out.push(("matmul", check_op(false, |t, x, y| {
        let n = t.value(y).cols();
        let w = t.constant(Tensor::full(vec![n, 3], 0.5));
        let xw = t.matmul(x, w)?;
        let yw = t.matmul(y, w)?;
        t.mul(xw, yw)
    })));
    out.push(("matmul both sides", check_op(false, |t, x, y| {
        let first = t.slice(y, 0, 0, 1)?;
        let n = t.value(first).cols();
        let row = t.gather_rows(first, vec![0; n])?; // [n, n]
        t.matmul(x, row)
    })));
    out.push(("concat rows", check_op(false, |t, x, y| t.concat(&[x, y], 0))));
    out.push(("concat cols", check_op(false, |t, x, y| t.concat(&[x, y, x], 1))));
    out.push(("slice", check_op(false, |t, x, _| {
        let n = t.value(x).cols();
        t.slice(x, 1, 1, n - 1)
    })));
    out.push(("gather_rows", check_op(false, |t, x, _| {
        let m = t.value(x).rows();
        t.gather_rows(x, (0..2 * m).map(|i| (i * 7) % m).collect())
    })));
    out.push(("pick_columns", check_op(false, |t, x, _| {
        let (m, n) = t.value(x).dims2();
        t.pick_columns(x, (0..m).map(|i| i % n).collect())
    })));
    out.push(("record generic", check_op(false, |t, x, y| t.record(OpKind::Mul, &[x, y]))));
    out
}

/// Three-layer ReLU/tanh network on random weights.
pub fn random_mlp() -> f64 {
    let mut worst: f64 = 0.0;
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(50 + trial);
        let widths = [4usize, 5, 6, 2];
        let mut store = ParamStore::new();
        let mut layers: Vec<(ParamId, ParamId)> = Vec::new();
        for (l, w) in widths.windows(2).enumerate() {
            let wt = store.add(format!("w{l}"), glorot_uniform(&mut rng, w[0], w[1])).unwrap();
            let b = store
                .add(format!("b{l}"), random_matrix(&mut rng, 1, w[1], 0.1))
                .unwrap();
            layers.push((wt, b));
        }
        let input = random_matrix(&mut rng, 3, 4, 1.0);
        let err = finite_diff_check(
            &mut store,
            |tape, store| {
                let mut h = tape.constant(input.clone());
                for (i, (w, b)) in layers.iter().enumerate() {
                    let wv = tape.param(store, *w);
                    let bv = tape.param(store, *b);
                    h = tape.matmul(h, wv)?;
                    h = tape.add(h, bv)?;
                    if i + 1 < layers.len() {
                        h = tape.tanh(h)?;
                    }
                }
                let sq = tape.mul(h, h)?;
                tape.mean(sq)
            },
            STEP,
        )
        .unwrap();
        worst = worst.max(err);
    }
    worst
}


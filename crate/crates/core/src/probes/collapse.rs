use crate::{Error, Result};

/// Health statistics of one batch of representation vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SetMetrics {
    /// Population variance of every coordinate.
    pub variance: Vec<f64>,
    pub mean_variance: f64,
    /// `exp` of the entropy of the normalized singular values.
    pub effective_rank: f64,
    /// Mean cosine similarity over pairs coming from distinct observations.
    pub mean_cosine: f64,
    /// Every vector is identical, or no two observations differ.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseMetrics {
    pub z: SetMetrics,
    pub b: SetMetrics,
}

/// Metrics for latents `z` and agent states `b` computed from the same
/// observations; `keys[i]` identifies the observation behind row `i`.
pub fn collapse_metrics<K: PartialEq>(z: &[Vec<f64>], b: &[Vec<f64>], keys: &[K]) -> Result<CollapseMetrics> {
    Ok(CollapseMetrics {
        z: SetMetrics::compute(z, keys)?,
        b: SetMetrics::compute(b, keys)?,
    })
}

impl SetMetrics {
    pub fn compute<K: PartialEq>(rows: &[Vec<f64>], keys: &[K]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Invalid(format!("collapse metrics need at least two rows, got {n}")));
        }
        if keys.len() != n {
            return Err(Error::Length {
                context: "collapse keys",
                a: keys.len(),
                b: n,
            });
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) || d == 0 {
            return Err(Error::Invalid("collapse metrics need rows of one positive width".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "representation".into(),
            });
        }

        let mut variance = vec![0.0; d];
        for j in 0..d {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            variance[j] = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        }
        let mean_variance = variance.iter().sum::<f64>() / d as f64;

        let identical = rows.iter().all(|r| r == &rows[0]);
        let effective_rank = if identical { 1.0 } else { effective_rank(rows) };

        let mut total = 0.0;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                if keys[i] != keys[j] {
                    total += cosine(&rows[i], &rows[j]);
                    pairs += 1;
                }
            }
        }
        let mean_cosine = if identical || pairs == 0 { 1.0 } else { total / pairs as f64 };
        Ok(Self {
            variance,
            mean_variance,
            effective_rank,
            mean_cosine,
            degenerate: identical || pairs == 0,
        })
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na > 0.0, nb > 0.0) {
        (true, true) => (dot / (na * nb)).clamp(-1.0, 1.0),
        (false, false) => 1.0,
        _ => 0.0,
    }
}

/// Singular values come from the eigenvalues of the smaller of the two
/// Gram matrices of the (uncentered) batch matrix.
fn effective_rank(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let d = rows[0].len();
    let gram = if n <= d {
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        (g, n)
    } else {
        let mut g = vec![0.0; d * d];
        for r in rows {
            for i in 0..d {
                for j in i..d {
                    g[i * d + j] += r[i] * r[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                g[i * d + j] = g[j * d + i];
            }
        }
        (g, d)
    };
    let sv: Vec<f64> = jacobi_eigenvalues(gram.0, gram.1)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    let sum: f64 = sv.iter().sum();
    if sum <= 0.0 {
        return 1.0;
    }
    let entropy: f64 = sv
        .iter()
        .map(|&s| s / sum)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    entropy.exp()
}

/// Eigenvalues of a symmetric `n x n` matrix (row-major) by cyclic Jacobi
/// rotations.
pub fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n, "matrix must be square");
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

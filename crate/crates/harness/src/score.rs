//! Normalized scores: `100 (a - u) / (h - u)` per task, with `u` the
//! uniform-policy return and `h` the scripted reference.

use crate::{HarnessError, Result};

pub const SCORE_CAP: f64 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TaskScore {
    pub random: f64,
    pub reference: f64,
    pub agent: f64,
    pub normalized: f64,
    pub capped: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedScoreTable {
    pub tasks: Vec<TaskScore>,
    pub mean_normalized: f64,
    pub mean_capped: f64,
}

/// `inputs[i] = (u_i, h_i, a_i)`.
pub fn aggregate_normalized_score(inputs: &[(f64, f64, f64)]) -> Result<NormalizedScoreTable> {
    if inputs.is_empty() {
        return Err(HarnessError::Invalid("no tasks to score".into()));
    }
    let mut tasks = Vec::with_capacity(inputs.len());
    for (i, &(u, h, a)) in inputs.iter().enumerate() {
        if h == u {
            return Err(HarnessError::Invalid(format!(
                "task {i}: reference and random scores are both {h}"
            )));
        }
        let normalized = 100.0 * (a - u) / (h - u);
        tasks.push(TaskScore {
            random: u,
            reference: h,
            agent: a,
            normalized,
            capped: normalized.min(SCORE_CAP),
        });
    }
    let n = tasks.len() as f64;
    Ok(NormalizedScoreTable {
        mean_normalized: tasks.iter().map(|t| t.normalized).sum::<f64>() / n,
        mean_capped: tasks.iter().map(|t| t.capped).sum::<f64>() / n,
        tasks,
    })
}

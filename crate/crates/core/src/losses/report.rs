use pebble_autodiff::{Tape, Var};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LossEntry {
    pub name: &'static str,
    pub weight: f64,
    pub value: f64,
}

/// Named scalar losses and their weights. Reductions: the prediction
/// losses average the per-pair squared norm, the RL terms average over
/// steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossReport {
    pub entries: Vec<LossEntry>,
}

impl LossReport {
    pub fn get(&self, name: &str) -> Option<&LossEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|e| e.value)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.weight * e.value).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.value.is_finite())
    }

    /// One `name=value (xweight)` item per entry, for error messages.
    pub fn describe(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}={} (x{})", e.name, e.value, e.weight))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Weighted scalar losses recorded on a tape.
#[derive(Clone, Debug, Default)]
pub struct LossTerms {
    terms: Vec<(&'static str, f64, Var)>,
}

impl LossTerms {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &'static str, weight: f64, loss: Var) {
        self.terms.push((name, weight, loss));
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `sum(weight * loss)` as a tape scalar.
    pub fn total(&self, tape: &mut Tape) -> Result<Var> {
        let mut total: Option<Var> = None;
        for &(_, w, v) in &self.terms {
            let scaled = tape.scale(v, w)?;
            total = Some(match total {
                None => scaled,
                Some(t) => tape.add(t, scaled)?,
            });
        }
        total.ok_or_else(|| Error::Invalid("no loss terms".into()))
    }

    pub fn report(&self, tape: &Tape) -> LossReport {
        LossReport {
            entries: self
                .terms
                .iter()
                .map(|&(name, weight, v)| LossEntry {
                    name,
                    weight,
                    value: tape.value(v).item(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pebble_autodiff::Tensor;

    #[test]
    fn total_is_weighted_sum() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::scalar(2.0));
        let b = tape.constant(Tensor::scalar(-3.0));
        let mut terms = LossTerms::new();
        terms.add("rl_policy", 1.0, a);
        terms.add("cpc", 0.1, b);
        let total = terms.total(&mut tape).unwrap();
        let report = terms.report(&tape);
        assert!((tape.value(total).item() - 1.7).abs() < 1e-15);
        assert!((report.total() - 1.7).abs() < 1e-15);
        assert!(report.contains("cpc") && !report.contains("pbl_reverse"));
    }
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::GroundTruth;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub action: usize,
    pub reward: f64,
    pub cont: bool,
    pub ground_truth: GroundTruth,
}

/// Collects steps for an offline CSV dump:
/// `t,action,reward,continue,<ground-truth columns>`.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryRecorder {
    rows: Vec<TrajectoryRow>,
}

impl TrajectoryRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: TrajectoryRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TrajectoryRow] {
        &self.rows
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let mut header = vec!["t", "action", "reward", "continue"];
        if let Some(first) = self.rows.first() {
            header.extend(first.ground_truth.fields().iter().map(|(k, _)| *k));
        }
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let mut cols = vec![
                r.t.to_string(),
                r.action.to_string(),
                format!("{:.9e}", r.reward),
                u8::from(r.cont).to_string(),
            ];
            cols.extend(r.ground_truth.fields().into_iter().map(|(_, v)| v));
            writeln!(w, "{}", cols.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

//! CSV training logs.
//!
//! Column order: `frames`, `updates`, one column per loss in
//! [`LOSS_COLUMNS`], `return_task0..return_task{K-1}`, `episodes`, the
//! collapse metrics in [`METRIC_COLUMNS`], `degenerate`, `probe_loss`.
//! Reals are written with 9 significant digits; an empty field means the
//! quantity was not measured in that window.

use std::fs::File;
use std::path::Path;

use pebble_core::losses::LossReport;
use pebble_core::probes::CollapseMetrics;

use crate::{HarnessError, Result};

pub const LOSS_COLUMNS: [&str; 12] = [
    "rl_policy",
    "rl_value",
    "rl_entropy",
    "pbl_forward",
    "pbl_reverse",
    "forward_regularizer",
    "reverse_regularizer",
    "pbl_forward_projection",
    "projection_regularizer",
    "cpc",
    "pixel_control",
    "total",
];

pub const METRIC_COLUMNS: [&str; 6] = [
    "z_variance",
    "z_effective_rank",
    "z_mean_cosine",
    "b_variance",
    "b_effective_rank",
    "b_mean_cosine",
];

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub frames: u64,
    pub updates: u64,
    /// Aligned with [`LOSS_COLUMNS`].
    pub losses: Vec<Option<f64>>,
    /// Mean raw return of the episodes that ended in the window, per task.
    pub returns: Vec<Option<f64>>,
    /// Episodes finished since the start of the run.
    pub episodes: u64,
    /// Aligned with [`METRIC_COLUMNS`].
    pub metrics: Vec<Option<f64>>,
    pub degenerate: Option<bool>,
    pub probe_loss: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

impl LogRecord {
    pub fn new(
        frames: u64,
        updates: u64,
        report: &LossReport,
        returns: &[Vec<f64>],
        episodes: u64,
        collapse: Option<&CollapseMetrics>,
        probe_loss: Option<f64>,
    ) -> Self {
        let metrics = match collapse {
            Some(c) => [&c.z, &c.b]
                .iter()
                .flat_map(|s| [s.mean_variance, s.effective_rank, s.mean_cosine])
                .map(Some)
                .collect(),
            None => vec![None; METRIC_COLUMNS.len()],
        };
        Self {
            frames,
            updates,
            losses: LOSS_COLUMNS.iter().map(|n| report.value(n)).collect(),
            returns: returns.iter().map(|r| mean(r)).collect(),
            episodes,
            metrics,
            degenerate: collapse.map(|c| c.z.degenerate || c.b.degenerate),
            probe_loss,
        }
    }

    pub fn loss(&self, name: &str) -> Option<f64> {
        let i = LOSS_COLUMNS.iter().position(|&n| n == name)?;
        self.losses[i]
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        let i = METRIC_COLUMNS.iter().position(|&n| n == name)?;
        self.metrics[i]
    }

    fn fields(&self) -> Vec<String> {
        let real = |v: &Option<f64>| v.map_or_else(String::new, |x| format!("{x:.8e}"));
        let mut out = vec![self.frames.to_string(), self.updates.to_string()];
        out.extend(self.losses.iter().map(real));
        out.extend(self.returns.iter().map(real));
        out.push(self.episodes.to_string());
        out.extend(self.metrics.iter().map(real));
        out.push(self.degenerate.map_or_else(String::new, |d| u8::from(d).to_string()));
        out.push(real(&self.probe_loss));
        out
    }
}

pub fn header(tasks: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["frames".into(), "updates".into()];
    h.extend(LOSS_COLUMNS.iter().map(|s| s.to_string()));
    h.extend((0..tasks).map(|i| format!("return_task{i}")));
    h.push("episodes".into());
    h.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    h.push("degenerate".into());
    h.push("probe_loss".into());
    h
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Csv(e.to_string())
}

/// Appends records to a log file as training proceeds.
pub struct LogWriter {
    inner: csv::Writer<File>,
    tasks: usize,
}

impl LogWriter {
    pub fn create(path: &Path, tasks: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path).map_err(csv_err)?;
        inner.write_record(header(tasks)).map_err(csv_err)?;
        inner.flush()?;
        Ok(Self { inner, tasks })
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<()> {
        if record.returns.len() != self.tasks {
            return Err(HarnessError::Csv(format!(
                "record has {} return columns, the log has {}",
                record.returns.len(),
                self.tasks
            )));
        }
        self.inner.write_record(record.fields()).map_err(csv_err)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_csv(records: &[LogRecord], tasks: usize, path: &Path) -> Result<()> {
    let mut w = LogWriter::create(path, tasks)?;
    for r in records {
        w.append(r)?;
    }
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<LogRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let head = reader.headers().map_err(csv_err)?.clone();
    let tasks = head.iter().filter(|h| h.starts_with("return_task")).count();
    if head.iter().map(str::to_string).collect::<Vec<_>>() != header(tasks) {
        return Err(HarnessError::Csv("unexpected log header".into()));
    }
    let mut out = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let bad = |what: &str| HarnessError::Csv(format!("row {}: bad {what}", line + 2));
        let mut it = row.iter();
        let mut int = |name: &str| -> Result<u64> { it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(name)) };
        let frames = int("frames")?;
        let updates = int("updates")?;
        let rest: Vec<&str> = row.iter().skip(2).collect();
        let real = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(s))
            }
        };
        let nl = LOSS_COLUMNS.len();
        let losses = rest[..nl].iter().map(|s| real(s)).collect::<Result<_>>()?;
        let returns = rest[nl..nl + tasks].iter().map(|s| real(s)).collect::<Result<_>>()?;
        let episodes = rest[nl + tasks].parse().map_err(|_| bad("episodes"))?;
        let m0 = nl + tasks + 1;
        let metrics = rest[m0..m0 + METRIC_COLUMNS.len()]
            .iter()
            .map(|s| real(s))
            .collect::<Result<_>>()?;
        let degenerate = match rest[m0 + METRIC_COLUMNS.len()] {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            _ => return Err(bad("degenerate")),
        };
        let probe_loss = real(rest[m0 + METRIC_COLUMNS.len() + 1])?;
        out.push(LogRecord {
            frames,
            updates,
            losses,
            returns,
            episodes,
            metrics,
            degenerate,
            probe_loss,
        });
    }
    Ok(out)
}

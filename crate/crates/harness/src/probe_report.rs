//! `probe-report`: probability maps and per-step probe losses for a
//! checkpoint.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use pebble_core::nn::Checkpoint;
use pebble_core::probes::write_pgm;

use crate::agent::Agent;
use crate::train::{probe_rollout, probe_score, ProbeScore};
use crate::{HarnessError, Result};

/// Maps are written for the first slot's first steps only.
pub const MAP_STEPS: usize = 40;
const REPORT_SEED_OFFSET: u64 = 1 << 41;

/// Writes `probe_loss.csv` (one row per step and slot), `summary.csv` and
/// `map_<step>.pgm` / `truth_<step>.pgm` graymaps into `out`.
pub fn probe_report(checkpoint: &Path, out: &Path) -> Result<ProbeScore> {
    let ck = Checkpoint::load(checkpoint)?;
    let (agent, probe) = Agent::from_checkpoint(&ck)?;
    let probe = probe.ok_or_else(|| HarnessError::Invalid("checkpoint carries no probe".into()))?;
    let cfg = &agent.cfg;
    let samples = probe_rollout(&agent, cfg.seed + REPORT_SEED_OFFSET)?;
    let score = probe_score(&probe, &samples, cfg.probe.memory_gap)?;
    fs::create_dir_all(out)?;

    let csv_err = |e: csv::Error| HarnessError::Csv(e.to_string());
    let mut w = csv::Writer::from_path(out.join("probe_loss.csv")).map_err(csv_err)?;
    w.write_record(["step", "slot", "object_cell", "steps_since_seen", "predicted_prob", "loss"])
        .map_err(csv_err)?;
    let grid = cfg.env.grid;
    for s in &samples {
        let probs = probe.predict_grid(&s.output)?;
        let p = probs[s.target.cell];
        w.write_record([
            s.step.to_string(),
            s.slot.to_string(),
            s.target.cell.to_string(),
            s.target.steps_since_seen.map_or_else(String::new, |k| k.to_string()),
            format!("{p:.8e}"),
            format!("{:.8e}", -p.ln()),
        ])
        .map_err(csv_err)?;
        if s.slot == 0 && s.step < MAP_STEPS {
            let mut f = BufWriter::new(File::create(out.join(format!("map_{:04}.pgm", s.step)))?);
            write_pgm(&mut f, &probs, grid)?;
            let mut truth = vec![0.0; grid * grid];
            truth[s.target.cell] = 1.0;
            let mut f = BufWriter::new(File::create(out.join(format!("truth_{:04}.pgm", s.step)))?);
            write_pgm(&mut f, &truth, grid)?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("summary.csv")).map_err(csv_err)?;
    w.write_record(["steps", "loss", "memory_steps", "memory_loss"]).map_err(csv_err)?;
    w.write_record([
        score.steps.to_string(),
        format!("{:.8e}", score.loss),
        score.memory_steps.to_string(),
        score.memory_loss.map_or_else(String::new, |l| format!("{l:.8e}")),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(score)
}

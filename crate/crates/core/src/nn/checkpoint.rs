//! Plain-text parameter checkpoints.
//!
//! ```text
//! pebble-checkpoint v1
//! config <line count>
//! <config lines, verbatim>
//! tensor <name> <rank> <extent>...
//! <row-major values separated by spaces>
//! ...
//! end
//! ```
//!
//! Values are written in shortest round-trip form, so a save/load cycle is
//! exact.

use std::fmt::Write as _;
use std::path::Path;

use pebble_autodiff::{ParamStore, Tensor};

use crate::{Error, Result};

pub const CHECKPOINT_HEADER: &str = "pebble-checkpoint v1";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    /// Serialized experiment configuration the tensors belong to.
    pub config: String,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new(config: impl Into<String>) -> Self {
        Self {
            config: config.into(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.push((name.into(), tensor));
    }

    /// Adds every parameter of `store` under its own name.
    pub fn add_store(&mut self, store: &ParamStore) {
        for (_, p) in store.iter() {
            self.push(p.name.clone(), p.value.clone());
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Copies stored values into `store`, matching by name. Frozen
    /// parameters are not written; they must already hold the saved values.
    pub fn load_store(&self, store: &mut ParamStore) -> Result<()> {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let name = store.name(id).to_string();
            let saved = self
                .get(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            let current = store.value(id);
            if saved.shape() != current.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    saved.shape(),
                    current.shape()
                )));
            }
            if store.is_frozen(id) {
                if saved != current {
                    return Err(Error::Checkpoint(format!("frozen tensor {name} differs from checkpoint")));
                }
            } else {
                store.set_value(id, saved.clone())?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let config_lines: Vec<&str> = if self.config.is_empty() {
            Vec::new()
        } else {
            self.config.lines().collect()
        };
        writeln!(out, "{CHECKPOINT_HEADER}").unwrap();
        writeln!(out, "config {}", config_lines.len()).unwrap();
        for l in config_lines {
            writeln!(out, "{l}").unwrap();
        }
        for (name, t) in &self.tensors {
            write!(out, "tensor {name} {}", t.shape().len()).unwrap();
            for d in t.shape() {
                write!(out, " {d}").unwrap();
            }
            out.push('\n');
            let vals: Vec<String> = t.data().iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", vals.join(" ")).unwrap();
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CHECKPOINT_HEADER => {}
            other => return Err(bad(format!("unsupported header {other:?}"))),
        }
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("config "))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad("missing config line count".into()))?;
        let mut config = String::new();
        for _ in 0..count {
            let l = lines.next().ok_or_else(|| bad("truncated config".into()))?;
            config.push_str(l);
            config.push('\n');
        }
        let mut ckpt = Checkpoint::new(config);
        loop {
            let l = lines.next().ok_or_else(|| bad("missing end marker".into()))?;
            if l == "end" {
                break;
            }
            let mut parts = l.split_whitespace();
            if parts.next() != Some("tensor") {
                return Err(bad(format!("expected tensor record, got {l:?}")));
            }
            let name = parts.next().ok_or_else(|| bad("tensor without name".into()))?;
            let nums: Vec<usize> = parts
                .map(|p| p.parse().map_err(|_| bad(format!("bad extent in {l:?}"))))
                .collect::<Result<_>>()?;
            let (&rank, shape) = nums.split_first().ok_or_else(|| bad(format!("missing rank in {l:?}")))?;
            if shape.len() != rank {
                return Err(bad(format!("rank {rank} does not match extents in {l:?}")));
            }
            let values = lines.next().ok_or_else(|| bad(format!("missing values for {name}")))?;
            let data: Vec<f64> = values
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad(format!("bad value {v:?} in {name}"))))
                .collect::<Result<_>>()?;
            let t = Tensor::new(shape.to_vec(), data).map_err(|e| bad(format!("{name}: {e}")))?;
            ckpt.push(name, t);
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

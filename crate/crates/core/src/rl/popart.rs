use pebble_autodiff::{ParamId, ParamStore};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopArtConfig {
    pub step: f64,
    pub min_scale: f64,
    pub max_scale: f64,
}

impl Default for PopArtConfig {
    fn default() -> Self {
        Self {
            step: 3e-4,
            min_scale: 1e-4,
            max_scale: 1e6,
        }
    }
}

/// Per-task running first and second moments of value targets.
#[derive(Clone, Debug, PartialEq)]
pub struct PopArt {
    pub cfg: PopArtConfig,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl PopArt {
    pub fn new(cfg: PopArtConfig, tasks: usize) -> Self {
        Self {
            cfg,
            mu: vec![0.0; tasks],
            nu: vec![1.0; tasks],
        }
    }

    pub fn tasks(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self, task: usize) -> f64 {
        let var = (self.nu[task] - self.mu[task] * self.mu[task]).max(0.0);
        var.sqrt().clamp(self.cfg.min_scale, self.cfg.max_scale)
    }

    pub fn normalize(&self, task: usize, value: f64) -> f64 {
        (value - self.mu[task]) / self.sigma(task)
    }

    pub fn unnormalize(&self, task: usize, value: f64) -> f64 {
        value * self.sigma(task) + self.mu[task]
    }

    /// Moves the moments toward the batch statistics of `targets` (pairs of
    /// task id and unnormalized target) and rescales the value head's last
    /// layer (`weight: [hidden, tasks]`, `bias: [1, tasks]`) so its
    /// unnormalized outputs are unchanged. Tasks absent from the batch keep
    /// their statistics.
    pub fn update(
        &mut self,
        targets: &[(usize, f64)],
        store: &mut ParamStore,
        weight: ParamId,
        bias: ParamId,
    ) -> Result<()> {
        let k = self.tasks();
        if let Some(&(task, _)) = targets.iter().find(|(t, _)| *t >= k) {
            return Err(Error::Invalid(format!("task id {task} out of range for {k} tasks")));
        }
        if targets.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "PopArt target".into(),
            });
        }
        let (rows, cols) = store.value(weight).dims2();
        if cols != k || store.value(bias).len() != k {
            return Err(Error::Width {
                context: "PopArt value head",
                expected: k,
                got: cols,
            });
        }
        let mut sum = vec![0.0; k];
        let mut sq = vec![0.0; k];
        let mut count = vec![0usize; k];
        for &(t, v) in targets {
            sum[t] += v;
            sq[t] += v * v;
            count[t] += 1;
        }
        let old_sigma: Vec<f64> = (0..k).map(|i| self.sigma(i)).collect();
        let old_mu = self.mu.clone();
        let beta = self.cfg.step;
        for i in 0..k {
            if count[i] == 0 {
                continue;
            }
            let n = count[i] as f64;
            self.mu[i] += beta * (sum[i] / n - self.mu[i]);
            self.nu[i] += beta * (sq[i] / n - self.nu[i]);
        }
        let w = store.value_mut(weight)?;
        let wd = w.data_mut();
        for i in 0..k {
            let ratio = old_sigma[i] / self.sigma(i);
            for r in 0..rows {
                wd[r * k + i] *= ratio;
            }
        }
        let b = store.value_mut(bias)?;
        for (i, bi) in b.data_mut().iter_mut().enumerate() {
            let s_new = self.sigma(i);
            *bi = (old_sigma[i] * *bi + old_mu[i] - self.mu[i]) / s_new;
        }
        Ok(())
    }
}

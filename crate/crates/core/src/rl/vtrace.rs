use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VTraceConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub rho_bar: f64,
    pub c_bar: f64,
}

impl Default for VTraceConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.99,
            rho_bar: 1.0,
            c_bar: 1.0,
        }
    }
}

impl VTraceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Invalid(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Invalid(format!("lambda must be in [0, 1], got {}", self.lambda)));
        }
        if !(self.rho_bar > 0.0 && self.c_bar > 0.0) {
            return Err(Error::Invalid("V-trace clip thresholds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VTraceOutput {
    /// Value targets `v_s`.
    pub vs: Vec<f64>,
    /// `rho_s (r_s + gamma cont_s v_{s+1} - V(x_s))`.
    pub advantages: Vec<f64>,
}

/// V-trace targets for one sequence. `values` has one more entry than the
/// other inputs: the bootstrap value of the state after the last step.
/// `conts[t] == false` means the episode ended at step `t`, which cuts both
/// the bootstrap and the trace.
pub fn vtrace(
    cfg: &VTraceConfig,
    values: &[f64],
    rewards: &[f64],
    behaviour_logp: &[f64],
    target_logp: &[f64],
    conts: &[bool],
) -> Result<VTraceOutput> {
    let n = rewards.len();
    for (len, what) in [
        (values.len(), n + 1),
        (behaviour_logp.len(), n),
        (target_logp.len(), n),
        (conts.len(), n),
    ] {
        if len != what {
            return Err(Error::Length {
                context: "vtrace inputs",
                a: len,
                b: what,
            });
        }
    }
    if behaviour_logp.iter().chain(target_logp).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "log-probability".into(),
        });
    }
    let mut rho = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut disc = Vec::with_capacity(n);
    for t in 0..n {
        let ratio = (target_logp[t] - behaviour_logp[t]).exp();
        rho.push(ratio.min(cfg.rho_bar));
        c.push(cfg.lambda * ratio.min(cfg.c_bar));
        disc.push(if conts[t] { cfg.gamma } else { 0.0 });
    }
    let mut vs = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let delta = rho[t] * (rewards[t] + disc[t] * values[t + 1] - values[t]);
        acc = delta + disc[t] * c[t] * acc;
        vs[t] = values[t] + acc;
    }
    let advantages = (0..n)
        .map(|t| {
            let next = if t + 1 < n { vs[t + 1] } else { values[n] };
            rho[t] * (rewards[t] + disc[t] * next - values[t])
        })
        .collect();
    Ok(VTraceOutput { vs, advantages })
}

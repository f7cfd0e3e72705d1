//! Line-oriented experiment configuration.
//!
//! One `key = value` pair per line, `#` starts a comment, keys are dotted
//! (`pbl.horizon = 20`). Lists are comma separated. Every key has a
//! default, so an empty file is a complete configuration.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use pebble_core::losses::PixelControlSpec;
use pebble_core::nn::{EncoderSpec, LstmSpec};
use pebble_core::rl::{OptimizerConfig, PopArtConfig, VTraceConfig};
use pebble_envs::{KeyDoorTask, NUM_ACTIONS, NUM_CHANNELS, VOCAB_SIZE};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    RlOnly,
    Pbl,
    PblRandomProjection,
    PblGrounded,
    Cpc,
    PixelControl,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::RlOnly,
        Method::Pbl,
        Method::PblRandomProjection,
        Method::PblGrounded,
        Method::Cpc,
        Method::PixelControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::RlOnly => "rl_only",
            Method::Pbl => "pbl",
            Method::PblRandomProjection => "pbl_random_projection",
            Method::PblGrounded => "pbl_grounded",
            Method::Cpc => "cpc",
            Method::PixelControl => "pixel_control",
        }
    }

    /// Whether the method unrolls `h_p` over partial histories.
    pub fn uses_partial_histories(self) -> bool {
        matches!(
            self,
            Method::Pbl | Method::PblRandomProjection | Method::PblGrounded | Method::Cpc
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    CubeRoom,
    KeyDoor,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CubeRoom => "cube_room",
            EnvKind::KeyDoor => "key_door",
        }
    }
}

/// Who picks the actions during collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Behaviour {
    /// The agent's current policy.
    Agent,
    /// Fixed uniform random policy; the representation still trains.
    Random,
}

impl Behaviour {
    pub fn name(self) -> &'static str {
        match self {
            Behaviour::Agent => "agent",
            Behaviour::Random => "random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipMode {
    /// Layer `l > 0` also sees the input; the output concatenates all layers.
    Concat,
    /// Plain stack; the output is the top layer.
    None,
}

impl SkipMode {
    pub fn name(self) -> &'static str {
        match self {
            SkipMode::Concat => "concat",
            SkipMode::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub grid: usize,
    pub episode_limit: usize,
    /// Cube room only.
    pub random_start: bool,
    /// Key-door only.
    pub instructions: bool,
    /// Key-door only.
    pub tasks: Vec<KeyDoorTask>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub view_widths: Vec<usize>,
    pub embed: usize,
    pub instr_width: usize,
    pub max_instr_len: usize,
    pub lstm: Vec<usize>,
    pub skip_mode: SkipMode,
    pub head_hidden: Vec<usize>,
    pub g_hidden: Vec<usize>,
    pub d_hidden: Vec<usize>,
    pub q_hidden: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PblConfig {
    pub horizon: usize,
    pub time_subsample: usize,
    pub future_subsample: usize,
    pub forward_weight: f64,
    pub reverse_weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpcConfig {
    pub weight: f64,
    pub negatives: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PixelControlConfig {
    pub weight: f64,
    pub gamma: f64,
    pub n_steps: usize,
    /// Cell height in view channels.
    pub cell_rows: usize,
    /// Cell width in view rays.
    pub cell_cols: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RlConfig {
    /// Include the actor-critic loss. Off for representation-only runs.
    pub enabled: bool,
    pub vtrace: VTraceConfig,
    pub baseline_weight: f64,
    pub entropy_cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub unroll: usize,
    pub batch: usize,
    pub total_frames: u64,
    /// Frames between log records; 0 means `total_frames / 100`.
    pub log_every: u64,
    /// Frames between checkpoints; 0 means a tenth of the run.
    pub checkpoint_every: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    /// Train an object-position probe in tandem (cube room only).
    pub enabled: bool,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    /// Probe optimizer steps per update, each on a minibatch of `T * B`
    /// states drawn uniformly from the replay.
    pub steps_per_update: usize,
    /// Most recent agent states kept for probe training; at least one
    /// unroll's worth is always kept.
    pub replay: usize,
    /// Minimum steps since the object was last visible for the memory
    /// probe.
    pub memory_gap: usize,
    /// Environment steps per batch slot used to score the probe at the end
    /// of a run.
    pub eval_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: String,
    pub method: Method,
    pub behaviour: Behaviour,
    pub env: EnvConfig,
    pub net: NetConfig,
    pub pbl: PblConfig,
    pub cpc: CpcConfig,
    pub pixel_control: PixelControlConfig,
    pub rl: RlConfig,
    pub popart: PopArtConfig,
    pub optim: OptimizerConfig,
    pub train: TrainConfig,
    pub probe: ProbeConfig,
    pub collapse_batch: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "runs".into(),
            method: Method::Pbl,
            behaviour: Behaviour::Agent,
            env: EnvConfig {
                kind: EnvKind::CubeRoom,
                grid: 7,
                episode_limit: 60,
                random_start: false,
                instructions: false,
                tasks: vec![KeyDoorTask::Goal, KeyDoorTask::Door],
            },
            net: NetConfig {
                view_widths: vec![64, 64],
                embed: 4,
                instr_width: 8,
                max_instr_len: 8,
                lstm: vec![32, 32],
                skip_mode: SkipMode::Concat,
                head_hidden: vec![64],
                g_hidden: vec![64, 64],
                d_hidden: vec![64, 64],
                q_hidden: vec![64],
            },
            pbl: PblConfig {
                horizon: 20,
                time_subsample: 6,
                future_subsample: 2,
                forward_weight: 1.0,
                reverse_weight: 1.0,
            },
            cpc: CpcConfig {
                weight: 0.1,
                negatives: 20,
            },
            pixel_control: PixelControlConfig {
                weight: 0.1,
                gamma: 0.9,
                n_steps: 20,
                cell_rows: 3,
                cell_cols: 1,
            },
            rl: RlConfig {
                enabled: true,
                vtrace: VTraceConfig::default(),
                baseline_weight: pebble_core::rl::BASELINE_WEIGHT,
                entropy_cost: pebble_core::rl::ENTROPY_COST,
            },
            popart: PopArtConfig::default(),
            optim: OptimizerConfig::default(),
            train: TrainConfig {
                unroll: 20,
                batch: 8,
                total_frames: 200_000,
                log_every: 0,
                checkpoint_every: 0,
            },
            probe: ProbeConfig {
                enabled: true,
                hidden: vec![64],
                learning_rate: pebble_core::probes::PROBE_LEARNING_RATE,
                steps_per_update: 1,
                replay: 0,
                memory_gap: 5,
                eval_steps: 400,
            },
            collapse_batch: 64,
        }
    }
}

/// Text form of a config value.
trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn format_value(&self) -> String;
}

macro_rules! display_value {
    ($($t:ty => $what:literal),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse().map_err(|_| format!("expected {}, got `{s}`", $what))
            }
            fn format_value(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_value!(usize => "a non-negative integer", u64 => "a non-negative integer", f64 => "a number", bool => "true or false");

impl ConfigValue for String {
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok(s.to_string())
    }
    fn format_value(&self) -> String {
        self.clone()
    }
}

impl ConfigValue for Vec<usize> {
    fn parse_value(s: &str) -> Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|p| usize::parse_value(p.trim())).collect()
    }
    fn format_value(&self) -> String {
        self.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    }
}

impl ConfigValue for Vec<KeyDoorTask> {
    fn parse_value(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| KeyDoorTask::parse(p.trim()).ok_or_else(|| format!("unknown key-door task `{}`", p.trim())))
            .collect()
    }
    fn format_value(&self) -> String {
        self.iter().map(|t| t.name()).collect::<Vec<_>>().join(",")
    }
}

macro_rules! named_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                <$t>::VARIANTS
                    .iter()
                    .copied()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| {
                        let names: Vec<_> = <$t>::VARIANTS.iter().map(|v| v.name()).collect();
                        format!("expected one of {}, got `{s}`", names.join(", "))
                    })
            }
            fn format_value(&self) -> String {
                self.name().to_string()
            }
        }
    )*};
}

impl Method {
    const VARIANTS: [Method; 6] = Method::ALL;
}
impl EnvKind {
    const VARIANTS: [EnvKind; 2] = [EnvKind::CubeRoom, EnvKind::KeyDoor];
}
impl Behaviour {
    const VARIANTS: [Behaviour; 2] = [Behaviour::Agent, Behaviour::Random];
}
impl SkipMode {
    const VARIANTS: [SkipMode; 2] = [SkipMode::Concat, SkipMode::None];
}

named_value!(Method, EnvKind, Behaviour, SkipMode);

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+;)*) => {
        /// Every accepted key, in serialization order.
        pub const KEYS: &[&str] = &[$($key),*];

        fn set_key(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Option<Result<(), String>> {
            match key {
                $($key => Some(ConfigValue::parse_value(value).map(|v| cfg.$($field).+ = v)),)*
                _ => None,
            }
        }

        fn key_lines(cfg: &ExperimentConfig) -> Vec<String> {
            vec![$(format!("{} = {}", $key, ConfigValue::format_value(&cfg.$($field).+))),*]
        }
    };
}

config_keys! {
    "seed" => seed;
    "output_dir" => output_dir;
    "method" => method;
    "behaviour" => behaviour;
    "env.kind" => env.kind;
    "env.grid" => env.grid;
    "env.episode_limit" => env.episode_limit;
    "env.random_start" => env.random_start;
    "env.instructions" => env.instructions;
    "env.tasks" => env.tasks;
    "net.view_widths" => net.view_widths;
    "net.embed" => net.embed;
    "net.instr_width" => net.instr_width;
    "net.max_instr_len" => net.max_instr_len;
    "net.lstm" => net.lstm;
    "net.skip_mode" => net.skip_mode;
    "net.head_hidden" => net.head_hidden;
    "net.g_hidden" => net.g_hidden;
    "net.d_hidden" => net.d_hidden;
    "net.q_hidden" => net.q_hidden;
    "pbl.horizon" => pbl.horizon;
    "pbl.time_subsample" => pbl.time_subsample;
    "pbl.future_subsample" => pbl.future_subsample;
    "pbl.forward_weight" => pbl.forward_weight;
    "pbl.reverse_weight" => pbl.reverse_weight;
    "cpc.weight" => cpc.weight;
    "cpc.negatives" => cpc.negatives;
    "pixel_control.weight" => pixel_control.weight;
    "pixel_control.gamma" => pixel_control.gamma;
    "pixel_control.n_steps" => pixel_control.n_steps;
    "pixel_control.cell_rows" => pixel_control.cell_rows;
    "pixel_control.cell_cols" => pixel_control.cell_cols;
    "rl.enabled" => rl.enabled;
    "rl.gamma" => rl.vtrace.gamma;
    "rl.lambda" => rl.vtrace.lambda;
    "rl.rho_bar" => rl.vtrace.rho_bar;
    "rl.c_bar" => rl.vtrace.c_bar;
    "rl.baseline_weight" => rl.baseline_weight;
    "rl.entropy_cost" => rl.entropy_cost;
    "popart.step" => popart.step;
    "popart.min_scale" => popart.min_scale;
    "popart.max_scale" => popart.max_scale;
    "optim.learning_rate" => optim.learning_rate;
    "optim.beta1" => optim.beta1;
    "optim.beta2" => optim.beta2;
    "optim.epsilon" => optim.epsilon;
    "train.unroll" => train.unroll;
    "train.batch" => train.batch;
    "train.total_frames" => train.total_frames;
    "train.log_every" => train.log_every;
    "train.checkpoint_every" => train.checkpoint_every;
    "probe.enabled" => probe.enabled;
    "probe.hidden" => probe.hidden;
    "probe.learning_rate" => probe.learning_rate;
    "probe.steps_per_update" => probe.steps_per_update;
    "probe.replay" => probe.replay;
    "probe.memory_gap" => probe.memory_gap;
    "probe.eval_steps" => probe.eval_steps;
    "diag.collapse_batch" => collapse_batch;
}

impl ExperimentConfig {
    /// Parses and validates. Later lines override earlier ones.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut lines = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    key: content.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let err = |message: String| ConfigError {
                line: Some(line),
                key: key.to_string(),
                message,
            };
            match set_key(&mut cfg, key, value) {
                None => return Err(err("unknown key".into())),
                Some(Err(message)) => return Err(err(message)),
                Some(Ok(())) => {
                    lines.insert(key.to_string(), line);
                }
            }
        }
        cfg.validate().map_err(|mut e| {
            e.line = lines.get(&e.key).copied();
            e
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, crate::HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::parse(&text)?)
    }

    /// Every key with its value; `parse(to_text())` gives back `self`.
    pub fn to_text(&self) -> String {
        let mut out = key_lines(self).join("\n");
        out.push('\n');
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |key: &str, message: String| {
            Err(ConfigError {
                line: None,
                key: key.to_string(),
                message,
            })
        };
        let positive = |key: &str, v: usize| if v == 0 { fail(key, "must be at least 1".into()) } else { Ok(()) };
        let weight = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                fail(key, format!("must be a finite non-negative weight, got {v}"))
            }
        };
        let widths = |key: &str, v: &[usize], allow_empty: bool| {
            if v.is_empty() && !allow_empty {
                fail(key, "needs at least one width".into())
            } else if v.contains(&0) {
                fail(key, "widths must be positive".into())
            } else {
                Ok(())
            }
        };

        if self.env.grid < 3 {
            return fail("env.grid", format!("must be at least 3, got {}", self.env.grid));
        }
        positive("env.episode_limit", self.env.episode_limit)?;
        if self.env.tasks.is_empty() {
            return fail("env.tasks", "needs at least one task".into());
        }
        if self.env.kind == EnvKind::CubeRoom && self.env.instructions {
            return fail("env.instructions", "the cube room has no instructions".into());
        }

        widths("net.view_widths", &self.net.view_widths, false)?;
        positive("net.embed", self.net.embed)?;
        positive("net.instr_width", self.net.instr_width)?;
        if self.env.instructions && self.net.max_instr_len < 5 {
            return fail("net.max_instr_len", "key-door instructions have 5 tokens".into());
        }
        widths("net.lstm", &self.net.lstm, false)?;
        widths("net.head_hidden", &self.net.head_hidden, true)?;
        widths("net.g_hidden", &self.net.g_hidden, true)?;
        widths("net.d_hidden", &self.net.d_hidden, true)?;
        widths("net.q_hidden", &self.net.q_hidden, true)?;

        positive("pbl.horizon", self.pbl.horizon)?;
        positive("pbl.time_subsample", self.pbl.time_subsample)?;
        positive("pbl.future_subsample", self.pbl.future_subsample)?;
        if self.pbl.future_subsample > self.pbl.horizon {
            return fail(
                "pbl.future_subsample",
                format!("cannot exceed the horizon {}", self.pbl.horizon),
            );
        }
        weight("pbl.forward_weight", self.pbl.forward_weight)?;
        weight("pbl.reverse_weight", self.pbl.reverse_weight)?;
        weight("cpc.weight", self.cpc.weight)?;
        positive("cpc.negatives", self.cpc.negatives)?;
        weight("pixel_control.weight", self.pixel_control.weight)?;
        if !(0.0..=1.0).contains(&self.pixel_control.gamma) {
            return fail("pixel_control.gamma", "must lie in [0, 1]".into());
        }
        positive("pixel_control.n_steps", self.pixel_control.n_steps)?;
        if let Err(e) = self.pixel_control_spec().validate() {
            return fail("pixel_control.cell_rows", e.to_string());
        }

        if let Err(e) = self.rl.vtrace.validate() {
            let key = match e.to_string() {
                s if s.contains("lambda") => "rl.lambda",
                s if s.contains("gamma") => "rl.gamma",
                _ => "rl.rho_bar",
            };
            return fail(key, e.to_string());
        }
        weight("rl.baseline_weight", self.rl.baseline_weight)?;
        weight("rl.entropy_cost", self.rl.entropy_cost)?;
        if !(self.popart.step > 0.0 && self.popart.step <= 1.0) {
            return fail("popart.step", "must lie in (0, 1]".into());
        }
        if !(self.popart.min_scale > 0.0 && self.popart.min_scale < self.popart.max_scale) {
            return fail("popart.min_scale", "need 0 < min_scale < max_scale".into());
        }
        let o = &self.optim;
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
            return fail("optim.learning_rate", "must be positive".into());
        }
        if !(0.0..1.0).contains(&o.beta1) {
            return fail("optim.beta1", "must lie in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&o.beta2) {
            return fail("optim.beta2", "must lie in [0, 1)".into());
        }
        if !(o.epsilon > 0.0) {
            return fail("optim.epsilon", "must be positive".into());
        }

        if self.train.unroll < 2 {
            return fail("train.unroll", "must be at least 2".into());
        }
        positive("train.batch", self.train.batch)?;
        if self.pbl.time_subsample > self.train.unroll - 1 {
            return fail(
                "pbl.time_subsample",
                format!("at most unroll - 1 = {} time indices have a future", self.train.unroll - 1),
            );
        }
        if self.train.total_frames < self.frames_per_update() {
            return fail(
                "train.total_frames",
                format!("must cover at least one update of {} frames", self.frames_per_update()),
            );
        }
        if self.collapse_batch < 2 || self.collapse_batch > self.train.unroll * self.train.batch {
            return fail(
                "diag.collapse_batch",
                format!("must lie in [2, unroll * batch = {}]", self.train.unroll * self.train.batch),
            );
        }
        widths("probe.hidden", &self.probe.hidden, true)?;
        positive("probe.eval_steps", self.probe.eval_steps)?;
        positive("probe.steps_per_update", self.probe.steps_per_update)?;
        if !(self.probe.learning_rate > 0.0 && self.probe.learning_rate.is_finite()) {
            return Err(ConfigError {
                line: None,
                key: "probe.learning_rate".into(),
                message: "must be a positive number".into(),
            });
        }
        if self.method == Method::RlOnly && !self.rl.enabled {
            return fail("rl.enabled", "rl_only with the RL loss disabled has nothing to train".into());
        }
        if self.behaviour == Behaviour::Random && self.rl.enabled {
            return fail("rl.enabled", "the RL loss needs the agent to act (behaviour = agent)".into());
        }
        Ok(())
    }

    pub fn frames_per_update(&self) -> u64 {
        (self.train.unroll * self.train.batch) as u64
    }

    pub fn log_every(&self) -> u64 {
        match self.train.log_every {
            0 => (self.train.total_frames / 100).max(1),
            n => n,
        }
    }

    pub fn checkpoint_every(&self) -> u64 {
        match self.train.checkpoint_every {
            0 => (self.train.total_frames / 10).max(1),
            n => n,
        }
    }

    pub fn view_len(&self) -> usize {
        2 * self.env.grid - 1
    }

    pub fn num_tasks(&self) -> usize {
        match self.env.kind {
            EnvKind::CubeRoom => 1,
            EnvKind::KeyDoor => self.env.tasks.len(),
        }
    }

    pub fn probe_active(&self) -> bool {
        self.probe.enabled && self.env.kind == EnvKind::CubeRoom
    }

    pub fn encoder_spec(&self) -> EncoderSpec {
        EncoderSpec {
            channels: NUM_CHANNELS,
            view_len: self.view_len(),
            view_widths: self.net.view_widths.clone(),
            vocab: VOCAB_SIZE,
            embed: self.net.embed,
            instr_width: self.net.instr_width,
            max_instr_len: self.net.max_instr_len,
            actions: NUM_ACTIONS + 1,
        }
    }

    pub fn lstm_spec(&self) -> LstmSpec {
        LstmSpec {
            input: self.encoder_spec().latent_width(),
            layers: self.net.lstm.clone(),
            skip: self.net.skip_mode == SkipMode::Concat,
        }
    }

    pub fn pixel_control_spec(&self) -> PixelControlSpec {
        PixelControlSpec {
            image_rows: NUM_CHANNELS,
            image_cols: self.view_len(),
            cell_rows: self.pixel_control.cell_rows,
            cell_cols: self.pixel_control.cell_cols,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.method, Method::Pbl);
        assert_eq!(cfg.pbl.horizon, 20);
        assert_eq!(cfg.optim.learning_rate, 1e-4);
        assert_eq!(cfg.cpc.negatives, 20);
    }

    #[test]
    fn comments_and_dotted_keys() {
        let cfg = ExperimentConfig::parse("# run\nmethod = cpc # contrastive\n\npbl.horizon=8\nnet.lstm = 16, 8\n").unwrap();
        assert_eq!(cfg.method, Method::Cpc);
        assert_eq!(cfg.pbl.horizon, 8);
        assert_eq!(cfg.net.lstm, vec![16, 8]);
    }

    #[test]
    fn zero_horizon_is_rejected_with_its_line() {
        let err = ExperimentConfig::parse("seed = 1\npbl.horizon = 0\n").unwrap_err();
        assert_eq!(err.key, "pbl.horizon");
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn unknown_key_and_bad_type_name_the_line() {
        let err = ExperimentConfig::parse("\npbl.horizn = 3").unwrap_err();
        assert_eq!((err.key.as_str(), err.line), ("pbl.horizn", Some(2)));
        let err = ExperimentConfig::parse("train.batch = many").unwrap_err();
        assert_eq!((err.key.as_str(), err.line), ("train.batch", Some(1)));
        assert!(err.to_string().contains("line 1"));
        let err = ExperimentConfig::parse("method = dreamer").unwrap_err();
        assert!(err.message.contains("pbl_grounded"));
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.method = Method::PblGrounded;
        cfg.env.kind = EnvKind::KeyDoor;
        cfg.env.instructions = true;
        cfg.env.tasks = vec![KeyDoorTask::Door];
        cfg.optim.learning_rate = 3.3e-4;
        cfg.net.head_hidden = vec![];
        cfg.output_dir = "some/dir".into();
        let text = cfg.to_text();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
        assert_eq!(text.lines().count(), KEYS.len());
    }

    #[test]
    fn cross_field_constraints() {
        assert!(ExperimentConfig::parse("pbl.time_subsample = 20").is_err());
        assert!(ExperimentConfig::parse("pbl.future_subsample = 3\npbl.horizon = 2").is_err());
        assert!(ExperimentConfig::parse("pixel_control.cell_cols = 2").is_err());
        assert!(ExperimentConfig::parse("behaviour = random").is_err());
        assert!(ExperimentConfig::parse("behaviour = random\nrl.enabled = false").is_ok());
        assert!(ExperimentConfig::parse("rl.lambda = 1.5").is_err());
        assert!(ExperimentConfig::parse("diag.collapse_batch = 1000").is_err());
    }
}

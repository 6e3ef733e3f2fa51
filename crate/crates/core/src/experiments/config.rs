use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constellation::ConstellationSpec;
use crate::error::{Error, Result};
use crate::netsim::SimConfig;
use crate::policy::{BufferMode, Hyperparameters, OptimizerKind, PolicyKind, TargetMode};
use crate::traffic::TrafficConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub policy: PolicyKind,
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Replay this request trace every episode instead of generating traffic.
    pub request_trace: Option<PathBuf>,
    /// Fill the `wall_s` metrics column. Off by default so that metrics files
    /// are reproducible byte for byte.
    pub record_wall_clock: bool,
    /// Write a JSON-lines decision trace per evaluated run.
    pub write_traces: bool,
    pub constellation: ConstellationSpec,
    pub traffic: TrafficConfig,
    pub sim: SimConfig,
    pub trainer: TrainerConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            policy: PolicyKind::TfDarm,
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            request_trace: None,
            record_wall_clock: false,
            write_traces: false,
            constellation: ConstellationSpec::iridium(),
            traffic: TrafficConfig::default(),
            sim: SimConfig::default(),
            trainer: TrainerConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub episodes: usize,
    pub minibatch: usize,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub entropy_coef: f64,
    pub target: TargetMode,
    pub target_sync_interval: usize,
    pub buffer: BufferMode,
    pub replay_capacity: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        let h = Hyperparameters::default();
        Self {
            episodes: 500,
            minibatch: 64,
            gamma: h.gamma,
            actor_lr: h.actor_lr,
            critic_lr: h.critic_lr,
            hidden: h.hidden,
            optimizer: h.optimizer,
            entropy_coef: h.entropy_coef,
            target: h.target,
            target_sync_interval: h.target_sync_interval,
            buffer: BufferMode::Fifo,
            replay_capacity: 10_000,
        }
    }
}

impl TrainerConfig {
    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            gamma: self.gamma,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            hidden: self.hidden.clone(),
            optimizer: self.optimizer,
            entropy_coef: self.entropy_coef,
            target: self.target,
            target_sync_interval: self.target_sync_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Requests per satellite for the load sweep.
    pub loads: Vec<usize>,
    /// `[planes, sats_per_plane]` pairs for the scale sweep.
    pub scales: Vec<[usize; 2]>,
    /// Shell used for the scale sweep; its plane layout is replaced per scale.
    pub scale_shell: ConstellationSpec,
    pub policies: Vec<PolicyKind>,
    /// Each evaluation is averaged over these master seeds.
    pub eval_seeds: Vec<u64>,
    /// Trained models for the learned policies. Missing ones are trained
    /// from this configuration first.
    pub tf_darm_checkpoint: Option<PathBuf>,
    pub mdg_checkpoint: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            loads: vec![50, 100, 150],
            scales: vec![[4, 43], [6, 58], [36, 20], [72, 22]],
            scale_shell: ConstellationSpec::starlink_like(4, 43),
            policies: PolicyKind::ALL.to_vec(),
            eval_seeds: vec![0],
            tf_darm_checkpoint: None,
            mdg_checkpoint: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config("version", format!("unsupported config version {}", self.version)));
        }
        self.constellation.validate()?;
        self.traffic.validate()?;
        self.sim.validate()?;
        self.trainer.hyperparameters().validate()?;
        if self.trainer.episodes < 1 {
            return Err(Error::config("trainer.episodes", "must be at least 1"));
        }
        if self.trainer.minibatch < 1 {
            return Err(Error::config("trainer.minibatch", "must be at least 1"));
        }
        if self.sweep.eval_seeds.is_empty() {
            return Err(Error::config("sweep.eval_seeds", "need at least one seed"));
        }
        for (k, [p, s]) in self.sweep.scales.iter().enumerate() {
            if *p < 1 || *s < 1 {
                return Err(Error::config(format!("sweep.scales[{k}]"), "planes and sats_per_plane must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(field_of(&e), e.message()))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("<root>", e.to_string()))
    }

    /// Reads a config file, applies `key=value` overrides (dotted keys,
    /// TOML literal values) and validates the result.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml_str(&text)?;
        let cfg = cfg.with_overrides(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Table::try_from(self).map_err(|e| Error::config("<root>", e.to_string()))?;
        for o in overrides {
            let (key, raw) =
                o.split_once('=').ok_or_else(|| Error::config(o.as_str(), "override must look like key=value"))?;
            let key = key.trim();
            set_path(&mut root, key, parse_value(raw.trim()))?;
        }
        let text = toml::to_string(&root).map_err(|e| Error::config("<root>", e.to_string()))?;
        Self::from_toml_str(&text)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty path segment"));
    }
    let mut table = root;
    for (depth, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| Error::config(parts[..=depth].join("."), "is not a table"))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Best-effort dotted path of the field a deserialisation error refers to.
fn field_of(e: &toml::de::Error) -> String {
    let msg = e.message();
    // serde's unknown-field and invalid-type messages quote the field name
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return rest[..end].to_string();
        }
    }
    if let Some(span) = e.span() {
        return format!("<byte {}>", span.start);
    }
    "<root>".into()
}

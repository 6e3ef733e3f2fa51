//! JSON checkpoint container. See `docs/checkpoint-format.md`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::a2c::{Hyperparameters, PolicyParameters};
use super::mlp::Mlp;
use super::PolicyKind;
use crate::error::{Error, Result};
use crate::features::{ObservationMode, ACTION_COUNT, OBSERVATION_WIDTH};

pub const CHECKPOINT_FORMAT: &str = "rrm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub actor_output: usize,
    pub critic_output: usize,
    pub activation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    policy: PolicyKind,
    observation_mode: ObservationMode,
    architecture: Architecture,
    hyperparameters: Hyperparameters,
    actor: Vec<f64>,
    critic: Vec<f64>,
}

/// A trained policy together with the feature view it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: PolicyKind,
    pub observation_mode: ObservationMode,
    pub params: PolicyParameters,
}

impl Checkpoint {
    pub fn new(policy: PolicyKind, params: PolicyParameters) -> Self {
        Self { policy, observation_mode: policy.observation_mode(), params }
    }

    pub fn to_json(&self) -> Result<String> {
        let p = &self.params;
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            policy: self.policy,
            observation_mode: self.observation_mode,
            architecture: Architecture {
                input: p.actor.input_width(),
                hidden: p.hyper.hidden.clone(),
                actor_output: p.actor.output_width(),
                critic_output: p.critic.output_width(),
                activation: "tanh".into(),
            },
            hyperparameters: p.hyper.clone(),
            actor: p.actor.params().to_vec(),
            critic: p.critic.params().to_vec(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: CheckpointFile =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
        if f.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", f.format)));
        }
        if f.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                f.version
            )));
        }
        let a = &f.architecture;
        if a.input != OBSERVATION_WIDTH {
            return Err(Error::Checkpoint(format!("input width {} (expected {OBSERVATION_WIDTH})", a.input)));
        }
        if a.actor_output != ACTION_COUNT || a.critic_output != 1 {
            return Err(Error::Checkpoint(format!(
                "output widths {}/{} (expected {ACTION_COUNT}/1)",
                a.actor_output, a.critic_output
            )));
        }
        if a.activation != "tanh" {
            return Err(Error::Checkpoint(format!("unsupported activation `{}`", a.activation)));
        }
        if a.hidden != f.hyperparameters.hidden {
            return Err(Error::Checkpoint("architecture and hyperparameters disagree on hidden sizes".into()));
        }
        if !f.policy.is_trainable() {
            return Err(Error::Checkpoint(format!("policy `{}` has no parameters", f.policy)));
        }
        let actor = Mlp::from_params(&f.hyperparameters.actor_sizes(), f.actor)?;
        let critic = Mlp::from_params(&f.hyperparameters.critic_sizes(), f.critic)?;
        let params = PolicyParameters::from_parts(actor, critic, f.hyperparameters)?;
        Ok(Self { policy: f.policy, observation_mode: f.observation_mode, params })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, ckpt.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text)
}

//! Decision policies: the shared abstraction, the actor-critic stack and its
//! checkpoints.

mod a2c;
mod checkpoint;
mod learner;
pub mod mlp;

use serde::{Deserialize, Serialize};

use crate::constellation::{SatelliteId, TopologySnapshot};
use crate::error::Result;
use crate::features::{Action, Observation, ObservationMode};
use crate::netsim::SlotLedger;
use crate::traffic::RequestRuntime;

pub use a2c::{
    masked_softmax, select_action, A2c, ActionMode, BufferMode, Hyperparameters, Losses, OptimizerKind,
    PolicyParameters, TargetMode, TdTarget,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use learner::{A2cLearner, NeuralPolicy};

/// Everything a policy may look at when choosing the next hop of one request.
pub struct DecisionContext<'a> {
    pub request: &'a RequestRuntime,
    pub node: SatelliteId,
    pub snapshot: &'a TopologySnapshot,
    pub ledger: &'a SlotLedger,
    /// Observation as filtered by the policy's [`ObservationMode`].
    pub observation: &'a Observation,
}

/// One decision epoch as seen by a learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_state: Observation,
    /// The request stopped being served after this epoch.
    pub done: bool,
}

pub trait RoutingPolicy {
    /// Must return an action that is valid under `ctx.observation.mask`.
    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Action>;

    /// Called once per decision epoch after the environment applied it.
    fn observe(&mut self, _transition: Transition) -> Result<()> {
        Ok(())
    }

    fn observation_mode(&self) -> ObservationMode {
        ObservationMode::Full
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "tf-darm")]
    TfDarm,
    #[serde(rename = "mdg")]
    Mdg,
    #[serde(rename = "spg")]
    Spg,
    #[serde(rename = "ltg")]
    Ltg,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::TfDarm, PolicyKind::Mdg, PolicyKind::Spg, PolicyKind::Ltg];

    pub fn is_trainable(self) -> bool {
        matches!(self, PolicyKind::TfDarm | PolicyKind::Mdg)
    }

    pub fn observation_mode(self) -> ObservationMode {
        match self {
            PolicyKind::Mdg => ObservationMode::WithoutOrientation,
            _ => ObservationMode::Full,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::TfDarm => "tf-darm",
            PolicyKind::Mdg => "mdg",
            PolicyKind::Spg => "spg",
            PolicyKind::Ltg => "ltg",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::error::Error::config("policy", format!("unknown policy `{s}`")))
    }
}

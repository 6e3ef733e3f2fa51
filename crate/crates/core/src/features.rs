//! Per-decision observation, action mask and phased reward.
//!
//! The observation is four blocks of four features, one block per neighbour
//! role in fixed order, so its width is the same for every constellation:
//!
//! | offset | feature | range |
//! |---|---|---|
//! | 0 | normalised link rate `rate / rate_max` | [0, 1] |
//! | 1 | success probability (residual capacity over demand, clipped) | [0, 1] |
//! | 2 | orientation: 2 reaches, 1 approaches, -1 recedes, 0 absent | {-1, 0, 1, 2} |
//! | 3 | supply/demand of the neighbour | >= 0 |

use serde::{Serialize, Serializer};

use crate::constellation::{NeighborRole, SatelliteId, TopologySnapshot};
use crate::netsim::{DelayBreakdown, LinkState, SlotLedger};
use crate::traffic::RequestRuntime;

pub const ROLE_COUNT: usize = 4;
pub const FEATURES_PER_ROLE: usize = 4;
pub const OBSERVATION_WIDTH: usize = ROLE_COUNT * FEATURES_PER_ROLE;
/// Four neighbour roles plus holding the request.
pub const ACTION_COUNT: usize = ROLE_COUNT + 1;

const RATE: usize = 0;
const SUCCESS: usize = 1;
const ORIENTATION: usize = 2;
const SUPPLY_DEMAND: usize = 3;

/// Lower bound on the hop delay used as the shaped-reward denominator.
pub const REWARD_DELAY_FLOOR_S: f64 = 1e-3;
pub const DESTINATION_REWARD: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Forward(NeighborRole),
    /// Do not transmit in this epoch.
    Hold,
}

impl Action {
    pub const ALL: [Action; ACTION_COUNT] = [
        Action::Forward(NeighborRole::IntraFore),
        Action::Forward(NeighborRole::IntraAft),
        Action::Forward(NeighborRole::InterRight),
        Action::Forward(NeighborRole::InterLeft),
        Action::Hold,
    ];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Action::Forward(r) => r.index(),
            Action::Hold => ROLE_COUNT,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Action::Forward(r) => r.serialize(s),
            Action::Hold => s.serialize_str("none"),
        }
    }
}

/// Which features a policy is allowed to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationMode {
    #[default]
    Full,
    /// Orientation features zeroed (the MDG ablation).
    WithoutOrientation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: [f64; OBSERVATION_WIDTH],
    pub mask: [bool; ACTION_COUNT],
}

impl Observation {
    /// Placeholder successor for terminal transitions: no links, hold only.
    pub fn terminal() -> Self {
        let mut mask = [false; ACTION_COUNT];
        mask[ROLE_COUNT] = true;
        Self { features: [0.0; OBSERVATION_WIDTH], mask }
    }

    #[inline]
    fn at(&self, role: NeighborRole, k: usize) -> f64 {
        self.features[role.index() * FEATURES_PER_ROLE + k]
    }

    pub fn block(&self, role: NeighborRole) -> &[f64] {
        let o = role.index() * FEATURES_PER_ROLE;
        &self.features[o..o + FEATURES_PER_ROLE]
    }

    pub fn norm_rate(&self, role: NeighborRole) -> f64 {
        self.at(role, RATE)
    }

    pub fn success_prob(&self, role: NeighborRole) -> f64 {
        self.at(role, SUCCESS)
    }

    pub fn orientation(&self, role: NeighborRole) -> f64 {
        self.at(role, ORIENTATION)
    }

    pub fn supply_demand(&self, role: NeighborRole) -> f64 {
        self.at(role, SUPPLY_DEMAND)
    }

    #[inline]
    pub fn is_valid(&self, a: Action) -> bool {
        self.mask[a.index()]
    }

    pub fn valid_actions(&self) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.into_iter().filter(|a| self.is_valid(*a))
    }

    pub fn view(&self, mode: ObservationMode) -> Observation {
        let mut o = self.clone();
        if mode == ObservationMode::WithoutOrientation {
            for role in NeighborRole::ALL {
                o.features[role.index() * FEATURES_PER_ROLE + ORIENTATION] = 0.0;
            }
        }
        o
    }
}

/// Relative position of neighbour `role` of `i` with respect to `destination`.
pub fn orientation(destination: SatelliteId, i: SatelliteId, role: NeighborRole, snapshot: &TopologySnapshot) -> f64 {
    let Some(j) = snapshot.neighbor(i, role) else { return 0.0 };
    if j == destination {
        2.0
    } else if snapshot.distance(j, destination) < snapshot.distance(i, destination) {
        1.0
    } else {
        -1.0
    }
}

/// Outgoing normalised capacity of neighbour `role` of `i` per request queued there.
pub fn supply_demand(
    destination: SatelliteId,
    i: SatelliteId,
    role: NeighborRole,
    snapshot: &TopologySnapshot,
    ledger: &SlotLedger,
) -> f64 {
    let Some(j) = snapshot.neighbor(i, role) else { return 0.0 };
    if j == destination {
        return 1.0;
    }
    let supply: f64 =
        NeighborRole::ALL.into_iter().filter_map(|r| ledger.link(j, r)).map(|l| ledger.norm_rate(l)).sum();
    supply / ledger.queue_len(j).max(1) as f64
}

pub fn success_prob(demand_bits: f64, link: Option<&LinkState>) -> f64 {
    match link {
        Some(l) => (l.residual_bits() / demand_bits).clamp(0.0, 1.0),
        None => 0.0,
    }
}

pub fn build_observation(
    request: &RequestRuntime,
    node: SatelliteId,
    snapshot: &TopologySnapshot,
    ledger: &SlotLedger,
) -> Observation {
    let dest = request.destination();
    let mut o = Observation::terminal();
    for role in NeighborRole::ALL {
        let Some(link) = ledger.link(node, role) else { continue };
        let base = role.index() * FEATURES_PER_ROLE;
        o.features[base + RATE] = ledger.norm_rate(link);
        o.features[base + SUCCESS] = success_prob(request.request.demand_bits, Some(link));
        o.features[base + ORIENTATION] = orientation(dest, node, role, snapshot);
        o.features[base + SUPPLY_DEMAND] = supply_demand(dest, node, role, snapshot, ledger);
        o.mask[role.index()] = true;
    }
    o
}

/// Reward of one decision epoch. `observation` must carry the orientation
/// features; `delay` is `None` when nothing was transmitted.
pub fn phased_reward(observation: &Observation, action: Action, delay: Option<&DelayBreakdown>) -> f64 {
    let (Action::Forward(role), Some(delay)) = (action, delay) else { return 0.0 };
    if observation.orientation(role) == 2.0 {
        return DESTINATION_REWARD;
    }
    let destination_reachable = NeighborRole::ALL
        .into_iter()
        .any(|r| observation.is_valid(Action::Forward(r)) && observation.orientation(r) == 2.0);
    let any_neighbor = NeighborRole::ALL.into_iter().any(|r| observation.is_valid(Action::Forward(r)));
    if destination_reachable || !any_neighbor {
        return 0.0;
    }
    observation.orientation(role) * observation.supply_demand(role) / delay.total_s.max(REWARD_DELAY_FLOOR_S)
}

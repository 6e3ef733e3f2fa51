//! Comparison policies.
//!
//! SPG forwards to the valid neighbour geometrically closest to the
//! destination; LTG forwards over the admissible link with the smallest
//! single-hop delay. MDG is the learned policy trained with the orientation
//! features withheld, see [`PolicyKind::Mdg`].

use crate::constellation::{NeighborRole, SatelliteId, TopologySnapshot};
use crate::error::Result;
use crate::features::{Action, Observation};
use crate::netsim::SlotLedger;
use crate::policy::{DecisionContext, PolicyKind, RoutingPolicy};
use crate::traffic::RequestRuntime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Mdg,
    Spg,
    Ltg,
}

impl From<BaselineKind> for PolicyKind {
    fn from(k: BaselineKind) -> Self {
        match k {
            BaselineKind::Mdg => PolicyKind::Mdg,
            BaselineKind::Spg => PolicyKind::Spg,
            BaselineKind::Ltg => PolicyKind::Ltg,
        }
    }
}

/// Strict-improvement argmin over valid roles; ties keep the lowest role.
fn argmin_role(mask: &[bool], mut cost: impl FnMut(NeighborRole) -> Option<f64>) -> Action {
    let mut best: Option<(NeighborRole, f64)> = None;
    for role in NeighborRole::ALL {
        if !mask[role.index()] {
            continue;
        }
        let Some(c) = cost(role) else { continue };
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((role, c));
        }
    }
    best.map_or(Action::Hold, |(r, _)| Action::Forward(r))
}

pub fn spg_select(
    request: &RequestRuntime,
    node: SatelliteId,
    snapshot: &TopologySnapshot,
    observation: &Observation,
) -> Action {
    let dest = request.destination();
    argmin_role(&observation.mask, |r| snapshot.neighbor(node, r).map(|j| snapshot.distance(j, dest)))
}

pub fn ltg_select(
    request: &RequestRuntime,
    node: SatelliteId,
    snapshot: &TopologySnapshot,
    ledger: &SlotLedger,
    observation: &Observation,
) -> Action {
    let demand = request.request.demand_bits;
    argmin_role(&observation.mask, |r| {
        let link = ledger.link(node, r)?;
        if !link.admits(demand) {
            return None;
        }
        let d = snapshot.link_distance(node, r)?;
        Some(crate::netsim::hop_delay(demand, link, d, ledger.processing_s).total_s)
    })
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SpgPolicy;

impl RoutingPolicy for SpgPolicy {
    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        Ok(spg_select(ctx.request, ctx.node, ctx.snapshot, ctx.observation))
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct LtgPolicy;

impl RoutingPolicy for LtgPolicy {
    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        Ok(ltg_select(ctx.request, ctx.node, ctx.snapshot, ctx.ledger, ctx.observation))
    }
}

//! Time-slotted network environment.
//!
//! A [`SlotLedger`] holds the per-slot link budgets and node queues. Requests
//! are moved one decision epoch at a time by [`step_slot`]: nodes are visited
//! round-robin in flat-id order and each visit hands the lowest-id waiting
//! request at that node to the policy. A request keeps hopping inside a slot
//! until it is delivered, fails, holds, is rejected, or would overrun the slot.

mod trace;

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::{NeighborRole, SatelliteId, TopologySnapshot};
use crate::error::{Error, Result};
use crate::features::{build_observation, phased_reward, Action, Observation};
use crate::policy::{DecisionContext, RoutingPolicy, Transition};
use crate::seed::{self, Stream};
use crate::traffic::{Hop, Outcome, RequestRuntime};

pub use trace::{JsonlTrace, TraceRecord, TraceSink};

/// Speed of light in km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Slot length in seconds.
    pub tau_s: f64,
    /// Slots per planning cycle.
    pub slots: usize,
    pub rate_min_bps: f64,
    pub rate_max_bps: f64,
    /// Per-hop on-board processing delay.
    pub processing_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { tau_s: 60.0, slots: 60, rate_min_bps: 5e9, rate_max_bps: 10e9, processing_s: 1e-3 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s.is_finite() && self.tau_s > 0.0) {
            return Err(Error::config("sim.tau_s", "must be positive"));
        }
        if self.slots < 1 {
            return Err(Error::config("sim.slots", "must be at least 1"));
        }
        if !(self.rate_min_bps.is_finite() && self.rate_min_bps > 0.0) {
            return Err(Error::config("sim.rate_min_bps", "must be positive"));
        }
        if !(self.rate_max_bps.is_finite() && self.rate_min_bps <= self.rate_max_bps) {
            return Err(Error::config("sim.rate_max_bps", "must be finite and >= rate_min_bps"));
        }
        if !(self.processing_s.is_finite() && self.processing_s >= 0.0) {
            return Err(Error::config("sim.processing_s", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub from: SatelliteId,
    pub to: SatelliteId,
    pub rate_bps: f64,
    pub capacity_bits: f64,
    pub used_bits: f64,
    /// Transmission time already committed to this link in the slot; the
    /// queuing delay seen by the next request.
    pub busy_s: f64,
    pub commits: u32,
}

impl LinkState {
    pub fn residual_bits(&self) -> f64 {
        self.capacity_bits - self.used_bits
    }

    pub fn admits(&self, demand_bits: f64) -> bool {
        self.used_bits + demand_bits <= self.capacity_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub transmission_s: f64,
    pub propagation_s: f64,
    pub processing_s: f64,
    pub queuing_s: f64,
    pub total_s: f64,
}

impl DelayBreakdown {
    pub fn new(transmission_s: f64, propagation_s: f64, processing_s: f64, queuing_s: f64) -> Self {
        Self {
            transmission_s,
            propagation_s,
            processing_s,
            queuing_s,
            total_s: transmission_s + propagation_s + processing_s + queuing_s,
        }
    }
}

/// Single-hop delay of `demand_bits` over `link`, queued behind everything
/// already committed to it this slot.
pub fn hop_delay(demand_bits: f64, link: &LinkState, distance_km: f64, processing_s: f64) -> DelayBreakdown {
    DelayBreakdown::new(demand_bits / link.rate_bps, distance_km / SPEED_OF_LIGHT_KM_S, processing_s, link.busy_s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub request_id: u64,
    pub from: SatelliteId,
    pub to: SatelliteId,
    pub delay: DelayBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    /// Residual slot capacity of the link is below the demand.
    Capacity,
    /// The hop would end after the slot boundary.
    SlotBudget,
    /// The request already crossed this directed link in this slot.
    RepeatedEdge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Admission {
    Admitted(DelayBreakdown),
    Rejected(Rejection),
}

/// Per-slot link budgets, node queues and the log of committed hops.
#[derive(Debug, Clone)]
pub struct SlotLedger {
    pub slot: usize,
    pub tau_s: f64,
    pub rate_max_bps: f64,
    pub processing_s: f64,
    links: Vec<LinkState>,
    link_of: Vec<[Option<u32>; 4]>,
    node_queues: Vec<BTreeSet<u64>>,
    located: HashMap<u64, SatelliteId>,
    pub decisions: Vec<Decision>,
}

/// Draws an independent uniform rate for every directed link of `snapshot`.
pub fn sample_link_rates(snapshot: &TopologySnapshot, cfg: &SimConfig, rng_seed: u64) -> Result<SlotLedger> {
    if cfg.rate_min_bps > cfg.rate_max_bps {
        return Err(Error::config("sim.rate_min_bps", "rate_min_bps exceeds rate_max_bps"));
    }
    cfg.validate()?;
    let mut rng = seed::rng(rng_seed, Stream::LinkRates, &[snapshot.slot as u64]);
    let n = snapshot.len();
    let mut links = Vec::with_capacity(n * 4);
    let mut link_of = vec![[None; 4]; n];
    for i in 0..n {
        let from = SatelliteId(i as u32);
        for role in NeighborRole::ALL {
            let Some(to) = snapshot.neighbor(from, role) else { continue };
            // two roles may name the same neighbour in degenerate shells
            let earlier = NeighborRole::ALL[..role.index()]
                .iter()
                .find(|r| snapshot.neighbor(from, **r) == Some(to))
                .and_then(|r| link_of[i][r.index()]);
            if let Some(idx) = earlier {
                link_of[i][role.index()] = Some(idx);
                continue;
            }
            let rate_bps = if cfg.rate_max_bps > cfg.rate_min_bps {
                rng.gen_range(cfg.rate_min_bps..=cfg.rate_max_bps)
            } else {
                cfg.rate_min_bps
            };
            link_of[i][role.index()] = Some(links.len() as u32);
            links.push(LinkState {
                from,
                to,
                rate_bps,
                capacity_bits: rate_bps * cfg.tau_s,
                used_bits: 0.0,
                busy_s: 0.0,
                commits: 0,
            });
        }
    }
    Ok(SlotLedger {
        slot: snapshot.slot,
        tau_s: cfg.tau_s,
        rate_max_bps: cfg.rate_max_bps,
        processing_s: cfg.processing_s,
        links,
        link_of,
        node_queues: vec![BTreeSet::new(); n],
        located: HashMap::new(),
        decisions: Vec::new(),
    })
}

impl SlotLedger {
    pub fn links(&self) -> &[LinkState] {
        &self.links
    }

    #[inline]
    pub fn link(&self, i: SatelliteId, role: NeighborRole) -> Option<&LinkState> {
        self.link_of[i.index()][role.index()].map(|k| &self.links[k as usize])
    }

    /// Mutable access for tests and scenario setup.
    pub fn link_mut(&mut self, i: SatelliteId, role: NeighborRole) -> Option<&mut LinkState> {
        self.link_of[i.index()][role.index()].map(|k| &mut self.links[k as usize])
    }

    /// Normalised rate of the link, `rate / rate_max`.
    #[inline]
    pub fn norm_rate(&self, link: &LinkState) -> f64 {
        link.rate_bps / self.rate_max_bps
    }

    /// Number of in-flight requests currently held at `j`.
    #[inline]
    pub fn queue_len(&self, j: SatelliteId) -> usize {
        self.node_queues[j.index()].len()
    }

    pub fn node_queue(&self, j: SatelliteId) -> impl Iterator<Item = u64> + '_ {
        self.node_queues[j.index()].iter().copied()
    }

    pub fn location_of(&self, request_id: u64) -> Option<SatelliteId> {
        self.located.get(&request_id).copied()
    }

    /// Registers a request at its current node.
    pub fn enqueue(&mut self, r: &RequestRuntime) -> Result<()> {
        if let Some(at) = self.located.insert(r.id(), r.current_node) {
            return Err(Error::Consistency(format!("request {} already queued at {at}", r.id())));
        }
        self.node_queues[r.current_node.index()].insert(r.id());
        Ok(())
    }

    /// Removes a finished request from its node queue.
    pub fn dequeue(&mut self, request_id: u64) {
        if let Some(at) = self.located.remove(&request_id) {
            self.node_queues[at.index()].remove(&request_id);
        }
    }

    /// Delay the request would see on `role` out of its current node.
    pub fn hop_delay(
        &self,
        request: &RequestRuntime,
        role: NeighborRole,
        snapshot: &TopologySnapshot,
    ) -> Result<DelayBreakdown> {
        let from = request.current_node;
        let (link, d) = self
            .link(from, role)
            .zip(snapshot.link_distance(from, role))
            .ok_or_else(|| Error::Topology(format!("no {role:?} link out of {from} in slot {}", self.slot)))?;
        Ok(hop_delay(request.request.demand_bits, link, d, self.processing_s))
    }
}

/// Tries to move `request` from `from` over its `role` link. On admission
/// the link budget, queues, request clock and hop log are all updated; on
/// rejection nothing changes.
pub fn admit_hop(
    ledger: &mut SlotLedger,
    snapshot: &TopologySnapshot,
    request: &mut RequestRuntime,
    from: SatelliteId,
    role: NeighborRole,
) -> Result<Admission> {
    if request.outcome != Outcome::InFlight {
        return Err(Error::Consistency(format!("request {} is not in flight", request.id())));
    }
    if request.current_node != from || ledger.location_of(request.id()) != Some(from) {
        return Err(Error::Consistency(format!(
            "request {} is at {} (ledger: {:?}), not at edge source {from}",
            request.id(),
            request.current_node,
            ledger.location_of(request.id())
        )));
    }
    let Some(k) = ledger.link_of[from.index()][role.index()] else {
        return Err(Error::Topology(format!("no {role:?} link out of {from} in slot {}", ledger.slot)));
    };
    let link = &ledger.links[k as usize];
    let to = link.to;
    let demand = request.request.demand_bits;
    if request.used_edge_in_slot(ledger.slot, from, to) {
        return Ok(Admission::Rejected(Rejection::RepeatedEdge));
    }
    if !link.admits(demand) {
        return Ok(Admission::Rejected(Rejection::Capacity));
    }
    let delay = ledger.hop_delay(request, role, snapshot)?;
    if request.slot_clock_s + delay.total_s > ledger.tau_s {
        return Ok(Admission::Rejected(Rejection::SlotBudget));
    }

    let link = &mut ledger.links[k as usize];
    link.used_bits += demand;
    link.busy_s += delay.transmission_s;
    link.commits += 1;
    ledger.node_queues[from.index()].remove(&request.id());
    ledger.node_queues[to.index()].insert(request.id());
    ledger.located.insert(request.id(), to);
    ledger.decisions.push(Decision { request_id: request.id(), from, to, delay });

    request.elapsed_delay_s += delay.total_s;
    request.slot_clock_s += delay.total_s;
    request.current_node = to;
    request.hop_log.push(Hop { slot: ledger.slot, from, to, role });
    Ok(Admission::Admitted(delay))
}

/// Applies the end-to-end success rule and records the outcome.
pub fn adjudicate(request: &mut RequestRuntime) -> Outcome {
    let r = &request.request;
    request.outcome = if request.elapsed_delay_s > r.deadline_s {
        Outcome::Failed
    } else if request.current_node == r.destination {
        Outcome::Delivered
    } else {
        Outcome::InFlight
    };
    request.outcome
}

/// The request stays where it is until the next slot.
fn park(request: &mut RequestRuntime, tau_s: f64) {
    let wait = (tau_s - request.slot_clock_s).max(0.0);
    request.elapsed_delay_s += wait;
    request.slot_clock_s = tau_s;
}

#[derive(Debug, Default)]
pub struct SlotResult {
    /// Requests still in flight at the slot boundary, ordered by id.
    pub carryover: Vec<RequestRuntime>,
    /// Requests delivered or failed during this slot.
    pub finished: Vec<RequestRuntime>,
    pub epochs: usize,
    pub reward_sum: f64,
}

/// Serves one slot. Every decision epoch produces exactly one transition,
/// handed to `policy.observe`.
pub fn step_slot(
    ledger: &mut SlotLedger,
    serving_queue: Vec<RequestRuntime>,
    policy: &mut dyn RoutingPolicy,
    snapshot: &TopologySnapshot,
    mut trace: Option<&mut dyn TraceSink>,
) -> Result<SlotResult> {
    let n = snapshot.len();
    let tau_s = ledger.tau_s;
    let mode = policy.observation_mode();

    let mut runtimes = serving_queue;
    let mut position = HashMap::with_capacity(runtimes.len());
    let mut active: Vec<BTreeSet<u64>> = vec![BTreeSet::new(); n];
    let mut remaining = 0usize;
    for (pos, r) in runtimes.iter_mut().enumerate() {
        if r.outcome != Outcome::InFlight {
            return Err(Error::Consistency(format!("request {} served while {:?}", r.id(), r.outcome)));
        }
        r.slot_clock_s = 0.0;
        ledger.enqueue(r)?;
        position.insert(r.id(), pos);
        active[r.current_node.index()].insert(r.id());
        remaining += 1;
    }

    let mut result = SlotResult::default();
    while remaining > 0 {
        for node in 0..n {
            let Some(id) = active[node].pop_first() else { continue };
            remaining -= 1;
            let r = &mut runtimes[position[&id]];
            let node = SatelliteId(node as u32);

            let full = build_observation(r, node, snapshot, ledger);
            let observation = full.view(mode);
            let action =
                policy.select(&DecisionContext { request: r, node, snapshot, ledger, observation: &observation })?;
            if !observation.is_valid(action) {
                return Err(Error::Contract(format!(
                    "policy chose masked-out action {action:?} for request {id} at {node} (mask {:?})",
                    observation.mask
                )));
            }

            let (delay, moved) = match action {
                Action::Hold => {
                    park(r, tau_s);
                    (None, false)
                }
                Action::Forward(role) => match admit_hop(ledger, snapshot, r, node, role)? {
                    Admission::Admitted(d) => (Some(d), true),
                    Admission::Rejected(_) => {
                        park(r, tau_s);
                        (None, false)
                    }
                },
            };
            let reward = phased_reward(&full, action, delay.as_ref());
            let outcome = adjudicate(r);
            let done = outcome != Outcome::InFlight;
            let next_state = if done {
                Observation::terminal()
            } else if moved {
                build_observation(r, r.current_node, snapshot, ledger).view(mode)
            } else {
                observation.clone()
            };

            if let Some(t) = trace.as_deref_mut() {
                t.record(&TraceRecord {
                    slot: ledger.slot,
                    request_id: id,
                    node,
                    action,
                    reward,
                    delay_breakdown: delay,
                    outcome,
                })?;
            }
            policy.observe(Transition { state: observation, action, reward, next_state, done })?;
            result.epochs += 1;
            result.reward_sum += reward;

            if done {
                ledger.dequeue(id);
            } else if moved {
                active[r.current_node.index()].insert(id);
                remaining += 1;
            }
        }
    }

    for r in runtimes {
        if r.outcome == Outcome::InFlight {
            result.carryover.push(r);
        } else {
            result.finished.push(r);
        }
    }
    Ok(result)
}

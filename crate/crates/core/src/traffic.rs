//! Batched service-request generation and per-request runtime bookkeeping.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, NeighborRole, SatelliteId};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Requests originating at every satellite over the whole cycle.
    pub per_leo_count: usize,
    pub demand_bits: f64,
    pub deadline_s: f64,
    /// When set, each request draws its deadline uniformly from this range
    /// instead of using `deadline_s`.
    pub deadline_range_s: Option<[f64; 2]>,
    pub arrival: ArrivalPattern,
    /// Number of batches for [`ArrivalPattern::Batches`]. Batches are spread
    /// evenly over the cycle; 1 puts everything in slot 0.
    pub arrival_batches: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalPattern {
    /// Every request draws its arrival slot uniformly over the cycle.
    Uniform,
    /// Equal-sized batches at evenly spaced slots.
    Batches,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            per_leo_count: 100,
            demand_bits: 5e9,
            deadline_s: 5.0,
            deadline_range_s: None,
            arrival: ArrivalPattern::Uniform,
            arrival_batches: 1,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.demand_bits.is_finite() && self.demand_bits > 0.0) {
            return Err(Error::config("traffic.demand_bits", "must be positive"));
        }
        if !(self.deadline_s.is_finite() && self.deadline_s > 0.0) {
            return Err(Error::config("traffic.deadline_s", "must be positive"));
        }
        if let Some([lo, hi]) = self.deadline_range_s {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::config("traffic.deadline_range_s", "need 0 < min <= max"));
            }
        }
        if self.arrival_batches < 1 {
            return Err(Error::config("traffic.arrival_batches", "must be at least 1"));
        }
        Ok(())
    }

    /// Slots that may receive arrivals. The last slot never does because
    /// requests are served from the slot after they arrive.
    pub fn arrival_slots(cycle_slots: usize) -> usize {
        cycle_slots.saturating_sub(1).max(1)
    }

    /// Arrival slot and per-satellite count of each batch for
    /// [`ArrivalPattern::Batches`].
    pub fn arrival_schedule(&self, cycle_slots: usize) -> Vec<(usize, usize)> {
        let usable = Self::arrival_slots(cycle_slots);
        let batches = self.arrival_batches.min(usable);
        (0..batches)
            .map(|b| {
                let slot = b * usable / batches;
                let count = self.per_leo_count / batches + usize::from(b < self.per_leo_count % batches);
                (slot, count)
            })
            .filter(|&(_, n)| n > 0)
            .collect()
    }
}

/// One end-to-end service request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub id: u64,
    pub source: SatelliteId,
    pub destination: SatelliteId,
    pub arrival_slot: usize,
    pub demand_bits: f64,
    pub deadline_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    InFlight,
    Delivered,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub slot: usize,
    pub from: SatelliteId,
    pub to: SatelliteId,
    pub role: NeighborRole,
}

/// Live state of a request as it moves through the network.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestRuntime {
    pub request: ServiceRequest,
    pub current_node: SatelliteId,
    /// Accumulated end-to-end delay since service began.
    pub elapsed_delay_s: f64,
    /// Time since the start of the current slot at which the request is
    /// ready at `current_node`.
    pub slot_clock_s: f64,
    pub hop_log: Vec<Hop>,
    pub outcome: Outcome,
}

impl RequestRuntime {
    pub fn new(request: ServiceRequest) -> Self {
        Self {
            current_node: request.source,
            request,
            elapsed_delay_s: 0.0,
            slot_clock_s: 0.0,
            hop_log: Vec::new(),
            outcome: Outcome::InFlight,
        }
    }

    pub fn id(&self) -> u64 {
        self.request.id
    }

    pub fn destination(&self) -> SatelliteId {
        self.request.destination
    }

    /// True when the directed edge was already used by this request in `slot`.
    pub fn used_edge_in_slot(&self, slot: usize, from: SatelliteId, to: SatelliteId) -> bool {
        self.hop_log.iter().rev().take_while(|h| h.slot == slot).any(|h| h.from == from && h.to == to)
    }
}

/// Draws one batch: `per_leo_count` requests per satellite, destinations
/// uniform over every other satellite. Ids start at `first_id` and follow
/// source order.
pub fn generate_batch(
    slot: usize,
    per_leo_count: usize,
    rng_seed: u64,
    roster: &Constellation,
    cfg: &TrafficConfig,
    first_id: u64,
) -> Result<Vec<ServiceRequest>> {
    draw_batch(slot, &vec![per_leo_count; roster.len()], rng_seed, roster, cfg, first_id)
}

fn draw_batch(
    slot: usize,
    counts: &[usize],
    rng_seed: u64,
    roster: &Constellation,
    cfg: &TrafficConfig,
    first_id: u64,
) -> Result<Vec<ServiceRequest>> {
    let n = roster.len();
    if n < 2 {
        return Err(Error::config("constellation", "traffic needs at least two satellites"));
    }
    let mut rng = seed::rng(rng_seed, Stream::Traffic, &[slot as u64]);
    let mut out = Vec::with_capacity(counts.iter().sum());
    let mut id = first_id;
    for source in roster.ids() {
        for _ in 0..counts[source.index()] {
            let mut d = rng.gen_range(0..n as u32 - 1);
            if d >= source.0 {
                d += 1;
            }
            let deadline_s = match cfg.deadline_range_s {
                Some([lo, hi]) if hi > lo => rng.gen_range(lo..=hi),
                Some([lo, _]) => lo,
                None => cfg.deadline_s,
            };
            out.push(ServiceRequest {
                id,
                source,
                destination: SatelliteId(d),
                arrival_slot: slot,
                demand_bits: cfg.demand_bits,
                deadline_s,
            });
            id += 1;
        }
    }
    Ok(out)
}

/// The full request stream of one planning cycle, ordered by arrival slot
/// and then by source.
pub fn generate_cycle(
    roster: &Constellation,
    cfg: &TrafficConfig,
    cycle_slots: usize,
    rng_seed: u64,
) -> Result<Vec<ServiceRequest>> {
    cfg.validate()?;
    let n = roster.len();
    let mut all = Vec::new();
    match cfg.arrival {
        ArrivalPattern::Batches => {
            for (slot, count) in cfg.arrival_schedule(cycle_slots) {
                let batch = generate_batch(slot, count, rng_seed, roster, cfg, all.len() as u64)?;
                all.extend(batch);
            }
        }
        ArrivalPattern::Uniform => {
            let usable = TrafficConfig::arrival_slots(cycle_slots);
            let mut counts = vec![vec![0usize; n]; usable];
            let mut rng = seed::rng(rng_seed, Stream::Traffic, &[u64::MAX]);
            for source in 0..n {
                for _ in 0..cfg.per_leo_count {
                    counts[rng.gen_range(0..usable)][source] += 1;
                }
            }
            for (slot, c) in counts.iter().enumerate() {
                if c.iter().any(|&k| k > 0) {
                    let batch = draw_batch(slot, c, rng_seed, roster, cfg, all.len() as u64)?;
                    all.extend(batch);
                }
            }
        }
    }
    Ok(all)
}

/// Builds the serving queue of `slot`: carried-over requests plus every
/// pending arrival from an earlier slot. Arrivals of `slot` itself stay in
/// `arrivals` until the next slot. The result is ordered by request id.
pub fn merge_carryover(
    arrivals: &mut Vec<ServiceRequest>,
    carryover: Vec<RequestRuntime>,
    slot: usize,
) -> Result<Vec<RequestRuntime>> {
    if let Some(bad) = carryover.iter().find(|r| r.outcome != Outcome::InFlight) {
        return Err(Error::Consistency(format!("request {} carried over with outcome {:?}", bad.id(), bad.outcome)));
    }
    let mut queue = carryover;
    let (ready, waiting): (Vec<_>, Vec<_>) = arrivals.drain(..).partition(|q| q.arrival_slot < slot);
    *arrivals = waiting;
    queue.extend(ready.into_iter().map(RequestRuntime::new));
    queue.sort_by_key(RequestRuntime::id);
    Ok(queue)
}

pub const TRACE_CSV_HEADER: [&str; 6] = ["id", "source", "destination", "arrival_slot", "demand_bits", "deadline_s"];

pub fn write_trace_csv(path: &Path, requests: &[ServiceRequest]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_CSV_HEADER)?;
    for q in requests {
        w.write_record(&[
            q.id.to_string(),
            q.source.to_string(),
            q.destination.to_string(),
            q.arrival_slot.to_string(),
            q.demand_bits.to_string(),
            q.deadline_s.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_trace_csv(path: &Path, roster: &Constellation) -> Result<Vec<ServiceRequest>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let q: ServiceRequest = row?;
        let n = roster.len() as u32;
        if q.source.0 >= n || q.destination.0 >= n || q.source == q.destination {
            return Err(Error::config("trace", format!("request {} has invalid endpoints", q.id)));
        }
        if !(q.demand_bits > 0.0 && q.deadline_s > 0.0) {
            return Err(Error::config("trace", format!("request {} has non-positive demand or deadline", q.id)));
        }
        out.push(q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_constellation, ConstellationSpec};

    fn iridium() -> Constellation {
        build_constellation(&ConstellationSpec::iridium()).unwrap()
    }

    #[test]
    fn hundred_per_leo_on_iridium() {
        let c = iridium();
        let batch = generate_batch(0, 100, 1, &c, &TrafficConfig::default(), 0).unwrap();
        assert_eq!(batch.len(), 6600);
        for q in &batch {
            assert_ne!(q.source, q.destination);
            assert_eq!(q.demand_bits, 5e9);
            assert_eq!(q.deadline_s, 5.0);
            assert_eq!(q.arrival_slot, 0);
        }
        for s in c.ids() {
            assert_eq!(batch.iter().filter(|q| q.source == s).count(), 100);
        }
    }

    #[test]
    fn zero_count_is_empty() {
        let batch = generate_batch(3, 0, 1, &iridium(), &TrafficConfig::default(), 0).unwrap();
        assert!(batch.is_empty());
    }

    #[test]
    fn same_seed_same_batch() {
        let c = iridium();
        let cfg = TrafficConfig { deadline_range_s: Some([2.0, 8.0]), ..Default::default() };
        let a = generate_batch(5, 20, 99, &c, &cfg, 0).unwrap();
        let b = generate_batch(5, 20, 99, &c, &cfg, 0).unwrap();
        assert_eq!(a, b);
        let other = generate_batch(5, 20, 100, &c, &cfg, 0).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn destinations_cover_everyone_else() {
        let c = iridium();
        let batch = generate_batch(0, 2000, 4, &c, &TrafficConfig::default(), 0).unwrap();
        let from0: std::collections::BTreeSet<_> =
            batch.iter().filter(|q| q.source == SatelliteId(0)).map(|q| q.destination.0).collect();
        assert_eq!(from0.len(), 65);
        assert!(!from0.contains(&0));
    }

    #[test]
    fn single_satellite_rejected() {
        let spec = ConstellationSpec { planes: 1, sats_per_plane: 1, ..ConstellationSpec::iridium() };
        let c = build_constellation(&spec).unwrap();
        assert!(matches!(generate_batch(0, 1, 0, &c, &TrafficConfig::default(), 0), Err(Error::Config { .. })));
    }

    #[test]
    fn arrivals_served_from_next_slot() {
        let c = iridium();
        let mut arrivals = generate_batch(4, 1, 0, &c, &TrafficConfig::default(), 0).unwrap();
        let q = merge_carryover(&mut arrivals, Vec::new(), 4).unwrap();
        assert!(q.is_empty());
        assert_eq!(arrivals.len(), 66);
        let q = merge_carryover(&mut arrivals, Vec::new(), 5).unwrap();
        assert_eq!(q.len(), 66);
        assert!(arrivals.is_empty());
        assert!(q.iter().all(|r| r.current_node == r.request.source && r.outcome == Outcome::InFlight));
    }

    #[test]
    fn carryover_merges_in_id_order() {
        let c = iridium();
        let mut arrivals = generate_batch(0, 1, 0, &c, &TrafficConfig::default(), 10).unwrap();
        let early = generate_batch(0, 1, 1, &c, &TrafficConfig::default(), 0).unwrap();
        let carry: Vec<_> = early.into_iter().take(3).map(RequestRuntime::new).collect();
        let q = merge_carryover(&mut arrivals, carry, 1).unwrap();
        assert_eq!(q.len(), 69);
        assert!(q.windows(2).all(|w| w[0].id() < w[1].id()));
    }

    #[test]
    fn finished_carryover_is_rejected() {
        let c = iridium();
        let mut r = RequestRuntime::new(generate_batch(0, 1, 0, &c, &TrafficConfig::default(), 0).unwrap().remove(0));
        r.outcome = Outcome::Delivered;
        let err = merge_carryover(&mut Vec::new(), vec![r], 1).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
    }

    #[test]
    fn schedule_splits_counts() {
        let cfg = TrafficConfig {
            per_leo_count: 10,
            arrival: ArrivalPattern::Batches,
            arrival_batches: 4,
            ..Default::default()
        };
        let s = cfg.arrival_schedule(60);
        assert_eq!(s.iter().map(|b| b.1).sum::<usize>(), 10);
        assert_eq!(s[0].0, 0);
        assert!(s.iter().all(|b| b.0 < 59));
        let single = TrafficConfig { per_leo_count: 10, ..Default::default() }.arrival_schedule(60);
        assert_eq!(single, vec![(0, 10)]);
    }

    #[test]
    fn uniform_arrivals_keep_per_satellite_count() {
        let c = iridium();
        let cfg = TrafficConfig { per_leo_count: 30, ..Default::default() };
        let reqs = generate_cycle(&c, &cfg, 60, 5).unwrap();
        assert_eq!(reqs.len(), 66 * 30);
        for s in c.ids() {
            assert_eq!(reqs.iter().filter(|q| q.source == s).count(), 30);
        }
        assert!(reqs.iter().all(|q| q.arrival_slot < 59));
        assert!(reqs.windows(2).all(|w| w[0].arrival_slot <= w[1].arrival_slot && w[0].id + 1 == w[1].id));
        let used: std::collections::BTreeSet<_> = reqs.iter().map(|q| q.arrival_slot).collect();
        assert!(used.len() > 40);
        assert_eq!(reqs, generate_cycle(&c, &cfg, 60, 5).unwrap());
    }

    #[test]
    fn trace_round_trip() {
        let c = iridium();
        let reqs = generate_cycle(&c, &TrafficConfig { per_leo_count: 3, ..Default::default() }, 60, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&path, &reqs).unwrap();
        assert_eq!(read_trace_csv(&path, &c).unwrap(), reqs);
    }
}

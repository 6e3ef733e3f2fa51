use crate::constellation::{NeighborRole, SatelliteId, TopologySnapshot};
use crate::netsim::{sample_link_rates, SimConfig, SlotLedger};
use crate::traffic::{RequestRuntime, ServiceRequest};

/// `n` satellites on a straight line `spacing_km` apart; satellite `k` links
/// forward to `k+1` and aft to `k-1`.
pub fn line_snapshot(n: usize, spacing_km: f64) -> TopologySnapshot {
    let mut neighbors = vec![[None; 4]; n];
    let mut distances = vec![[None; 4]; n];
    for k in 0..n {
        if k + 1 < n {
            neighbors[k][NeighborRole::IntraFore.index()] = Some(SatelliteId(k as u32 + 1));
            distances[k][NeighborRole::IntraFore.index()] = Some(spacing_km);
        }
        if k > 0 {
            neighbors[k][NeighborRole::IntraAft.index()] = Some(SatelliteId(k as u32 - 1));
            distances[k][NeighborRole::IntraAft.index()] = Some(spacing_km);
        }
    }
    TopologySnapshot {
        slot: 0,
        epoch_s: 0.0,
        positions: (0..n).map(|k| [7000.0 + k as f64 * spacing_km, 0.0, 0.0]).collect(),
        latitudes_deg: vec![0.0; n],
        neighbors,
        distances,
    }
}

/// Ledger with every link at the same rate.
pub fn fixed_rate_ledger(snapshot: &TopologySnapshot, rate_bps: f64) -> SlotLedger {
    let cfg = SimConfig { rate_min_bps: rate_bps, rate_max_bps: rate_bps, ..Default::default() };
    sample_link_rates(snapshot, &cfg, 0).unwrap()
}

pub fn request(id: u64, source: u32, destination: u32) -> RequestRuntime {
    RequestRuntime::new(ServiceRequest {
        id,
        source: SatelliteId(source),
        destination: SatelliteId(destination),
        arrival_slot: 0,
        demand_bits: 5e9,
        deadline_s: 5.0,
    })
}

//! Walker constellation geometry, circular-orbit propagation and per-slot
//! inter-satellite link (ISL) snapshots.
//!
//! Every satellite carries four laser terminals: two towards its in-plane
//! fore/aft neighbours and two towards the same-index satellite in the
//! adjacent planes. In-plane links are permanent; cross-plane links drop out
//! across the counter-rotating seam of a Walker-star shell, above the polar
//! latitude cutoff, and (optionally) beyond a maximum link range.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const EARTH_MU_KM3_S2: f64 = 398_600.441_8;
/// Inclination at and above which a shell is laid out as a Walker star.
pub const WALKER_STAR_MIN_INCLINATION_DEG: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationSpec {
    pub planes: usize,
    pub sats_per_plane: usize,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    /// Shift of the argument of latitude between adjacent planes, as a
    /// fraction of the in-plane spacing (0.5 puts plane p+1 half a slot ahead).
    pub phasing_offset: f64,
    /// Only meaningful for Walker-star shells.
    pub seam_crosslinks_enabled: bool,
    pub polar_latitude_cutoff_deg: f64,
    /// Cross-plane links longer than this are treated as out of terminal range.
    pub max_interplane_range_km: Option<f64>,
}

impl Default for ConstellationSpec {
    fn default() -> Self {
        Self::iridium()
    }
}

impl ConstellationSpec {
    /// 66 satellites in six near-polar planes at 780 km.
    pub fn iridium() -> Self {
        Self {
            planes: 6,
            sats_per_plane: 11,
            altitude_km: 780.0,
            inclination_deg: 86.4,
            phasing_offset: 0.5,
            seam_crosslinks_enabled: false,
            polar_latitude_cutoff_deg: 70.0,
            max_interplane_range_km: Some(DEFAULT_MAX_INTERPLANE_RANGE_KM),
        }
    }

    /// Starlink-style inclined shell (550 km, 53 deg) with the given layout.
    pub fn starlink_like(planes: usize, sats_per_plane: usize) -> Self {
        Self {
            planes,
            sats_per_plane,
            altitude_km: 550.0,
            inclination_deg: 53.0,
            phasing_offset: 0.0,
            seam_crosslinks_enabled: false,
            polar_latitude_cutoff_deg: 70.0,
            max_interplane_range_km: Some(DEFAULT_MAX_INTERPLANE_RANGE_KM),
        }
    }

    pub fn total_satellites(&self) -> usize {
        self.planes * self.sats_per_plane
    }

    pub fn pattern(&self) -> WalkerPattern {
        if self.inclination_deg >= WALKER_STAR_MIN_INCLINATION_DEG {
            WalkerPattern::Star
        } else {
            WalkerPattern::Delta
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.planes < 1 {
            return Err(Error::config("constellation.planes", "must be at least 1"));
        }
        if self.sats_per_plane < 1 {
            return Err(Error::config("constellation.sats_per_plane", "must be at least 1"));
        }
        if u32::try_from(self.total_satellites()).is_err() {
            return Err(Error::config("constellation.planes", "too many satellites"));
        }
        if !(self.altitude_km.is_finite() && self.altitude_km > 0.0) {
            return Err(Error::config("constellation.altitude_km", "must be positive"));
        }
        if !(self.inclination_deg > 0.0 && self.inclination_deg <= 180.0) {
            return Err(Error::config("constellation.inclination_deg", "must lie in (0, 180]"));
        }
        if !self.phasing_offset.is_finite() {
            return Err(Error::config("constellation.phasing_offset", "must be finite"));
        }
        if !(self.polar_latitude_cutoff_deg > 0.0 && self.polar_latitude_cutoff_deg <= 90.0) {
            return Err(Error::config("constellation.polar_latitude_cutoff_deg", "must lie in (0, 90]"));
        }
        if let Some(r) = self.max_interplane_range_km {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::config("constellation.max_interplane_range_km", "must be positive when set"));
            }
        }
        Ok(())
    }
}

pub const DEFAULT_MAX_INTERPLANE_RANGE_KM: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkerPattern {
    /// Planes spread over 180 deg of RAAN with a counter-rotating seam.
    Star,
    /// Planes spread over 360 deg of RAAN, no seam.
    Delta,
}

/// Flat satellite index: `plane * sats_per_plane + slot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SatelliteId(pub u32);

impl SatelliteId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for SatelliteId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fixed position of a neighbour in the four-terminal layout. The order is
/// part of the observation layout and never changes between slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborRole {
    IntraFore,
    IntraAft,
    InterRight,
    InterLeft,
}

impl NeighborRole {
    pub const ALL: [NeighborRole; 4] =
        [NeighborRole::IntraFore, NeighborRole::IntraAft, NeighborRole::InterRight, NeighborRole::InterLeft];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_intra_plane(self) -> bool {
        matches!(self, NeighborRole::IntraFore | NeighborRole::IntraAft)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalSlot {
    pub id: SatelliteId,
    pub plane: usize,
    pub slot: usize,
    pub raan_rad: f64,
    /// Argument of latitude at the start of the planning cycle.
    pub arg_latitude_rad: f64,
}

/// The satellite roster of one shell, on circular orbits.
#[derive(Debug, Clone)]
pub struct Constellation {
    spec: ConstellationSpec,
    radius_km: f64,
    mean_motion_rad_s: f64,
    sats: Vec<OrbitalSlot>,
}

pub fn build_constellation(spec: &ConstellationSpec) -> Result<Constellation> {
    Constellation::new(spec.clone())
}

impl Constellation {
    pub fn new(spec: ConstellationSpec) -> Result<Self> {
        spec.validate()?;
        let radius_km = EARTH_RADIUS_KM + spec.altitude_km;
        let mean_motion_rad_s = (EARTH_MU_KM3_S2 / radius_km.powi(3)).sqrt();
        let raan_spread = match spec.pattern() {
            WalkerPattern::Star => PI,
            WalkerPattern::Delta => TAU,
        };
        let in_plane_step = TAU / spec.sats_per_plane as f64;
        let mut sats = Vec::with_capacity(spec.total_satellites());
        for plane in 0..spec.planes {
            let raan_rad = raan_spread * plane as f64 / spec.planes as f64;
            let plane_phase = spec.phasing_offset * in_plane_step * plane as f64;
            for slot in 0..spec.sats_per_plane {
                sats.push(OrbitalSlot {
                    id: SatelliteId((plane * spec.sats_per_plane + slot) as u32),
                    plane,
                    slot,
                    raan_rad,
                    arg_latitude_rad: (in_plane_step * slot as f64 + plane_phase).rem_euclid(TAU),
                });
            }
        }
        Ok(Self { spec, radius_km, mean_motion_rad_s, sats })
    }

    pub fn spec(&self) -> &ConstellationSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.sats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sats.is_empty()
    }

    pub fn satellites(&self) -> &[OrbitalSlot] {
        &self.sats
    }

    pub fn ids(&self) -> impl Iterator<Item = SatelliteId> + '_ {
        self.sats.iter().map(|s| s.id)
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }

    pub fn orbital_period_s(&self) -> f64 {
        TAU / self.mean_motion_rad_s
    }

    pub fn id_of(&self, plane: usize, slot: usize) -> SatelliteId {
        SatelliteId((plane * self.spec.sats_per_plane + slot) as u32)
    }

    /// Snapshot at `slot` of a planning cycle that starts at epoch 0.
    pub fn propagate(&self, slot: usize, tau_s: f64) -> TopologySnapshot {
        self.snapshot_at(slot, slot as f64 * tau_s)
    }

    /// Snapshot labelled `slot`, evaluated at `epoch_s` seconds after the
    /// constellation epoch.
    pub fn snapshot_at(&self, slot: usize, epoch_s: f64) -> TopologySnapshot {
        let spec = &self.spec;
        let (sin_i, cos_i) = spec.inclination_deg.to_radians().sin_cos();
        let advance = self.mean_motion_rad_s * epoch_s;

        let mut positions = Vec::with_capacity(self.sats.len());
        let mut latitudes_deg = Vec::with_capacity(self.sats.len());
        for s in &self.sats {
            let u = s.arg_latitude_rad + advance;
            let (sin_u, cos_u) = u.sin_cos();
            let (sin_o, cos_o) = s.raan_rad.sin_cos();
            let r = self.radius_km;
            positions.push([
                r * (cos_o * cos_u - sin_o * sin_u * cos_i),
                r * (sin_o * cos_u + cos_o * sin_u * cos_i),
                r * (sin_u * sin_i),
            ]);
            latitudes_deg.push((sin_u * sin_i).clamp(-1.0, 1.0).asin().to_degrees());
        }

        let mut neighbors = Vec::with_capacity(self.sats.len());
        let mut distances = Vec::with_capacity(self.sats.len());
        for s in &self.sats {
            let mut roles = [None; 4];
            let mut dists = [None; 4];
            for role in NeighborRole::ALL {
                let Some(j) = self.candidate(s.plane, s.slot, role) else { continue };
                let d = euclidean(&positions[s.id.index()], &positions[j.index()]);
                if !role.is_intra_plane() {
                    let cutoff = spec.polar_latitude_cutoff_deg;
                    if latitudes_deg[s.id.index()].abs() > cutoff || latitudes_deg[j.index()].abs() > cutoff {
                        continue;
                    }
                    if spec.max_interplane_range_km.is_some_and(|max| d > max) {
                        continue;
                    }
                }
                roles[role.index()] = Some(j);
                dists[role.index()] = Some(d);
            }
            neighbors.push(roles);
            distances.push(dists);
        }

        TopologySnapshot { slot, epoch_s, positions, latitudes_deg, neighbors, distances }
    }

    /// Terminal pairing before any visibility rule is applied.
    fn candidate(&self, plane: usize, slot: usize, role: NeighborRole) -> Option<SatelliteId> {
        let planes = self.spec.planes;
        let per_plane = self.spec.sats_per_plane;
        let (p, k) = match role {
            NeighborRole::IntraFore => (plane, (slot + 1) % per_plane),
            NeighborRole::IntraAft => (plane, (slot + per_plane - 1) % per_plane),
            NeighborRole::InterRight => {
                let wraps = plane + 1 == planes;
                if wraps && !self.crosses_seam() {
                    return None;
                }
                ((plane + 1) % planes, slot)
            }
            NeighborRole::InterLeft => {
                let wraps = plane == 0;
                if wraps && !self.crosses_seam() {
                    return None;
                }
                ((plane + planes - 1) % planes, slot)
            }
        };
        if p == plane && k == slot {
            return None;
        }
        Some(self.id_of(p, k))
    }

    fn crosses_seam(&self) -> bool {
        match self.spec.pattern() {
            WalkerPattern::Delta => true,
            WalkerPattern::Star => self.spec.seam_crosslinks_enabled,
        }
    }
}

#[inline]
pub fn euclidean(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Immutable ISL graph of one time slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologySnapshot {
    pub slot: usize,
    pub epoch_s: f64,
    /// ECI coordinates in km.
    pub positions: Vec<[f64; 3]>,
    pub latitudes_deg: Vec<f64>,
    pub neighbors: Vec<[Option<SatelliteId>; 4]>,
    /// Link length per (satellite, role); `None` where the role is absent.
    pub distances: Vec<[Option<f64>; 4]>,
}

impl TopologySnapshot {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn neighbor_roles(&self, i: SatelliteId) -> [Option<SatelliteId>; 4] {
        self.neighbors[i.index()]
    }

    #[inline]
    pub fn neighbor(&self, i: SatelliteId, role: NeighborRole) -> Option<SatelliteId> {
        self.neighbors[i.index()][role.index()]
    }

    #[inline]
    pub fn link_distance(&self, i: SatelliteId, role: NeighborRole) -> Option<f64> {
        self.distances[i.index()][role.index()]
    }

    /// Straight-line distance between any two satellites.
    #[inline]
    pub fn distance(&self, i: SatelliteId, j: SatelliteId) -> f64 {
        euclidean(&self.positions[i.index()], &self.positions[j.index()])
    }

    pub fn present_neighbors(&self, i: SatelliteId) -> impl Iterator<Item = (NeighborRole, SatelliteId)> + '_ {
        NeighborRole::ALL.into_iter().filter_map(move |r| self.neighbor(i, r).map(|j| (r, j)))
    }

    pub fn degree(&self, i: SatelliteId) -> usize {
        self.neighbors[i.index()].iter().flatten().count()
    }

    pub fn is_linked(&self, i: SatelliteId, j: SatelliteId) -> bool {
        self.neighbors[i.index()].contains(&Some(j))
    }

    /// Directed edges `(i, j, distance_km)`, deduplicated, in (i, role) order.
    pub fn edges(&self) -> Vec<(SatelliteId, SatelliteId, f64)> {
        let mut out = Vec::with_capacity(self.len() * 4);
        for (i, roles) in self.neighbors.iter().enumerate() {
            let i = SatelliteId(i as u32);
            for (r, j) in roles.iter().enumerate() {
                let Some(j) = *j else { continue };
                if roles[..r].contains(&Some(j)) {
                    continue;
                }
                out.push((i, j, self.distances[i.index()][r].expect("distance for present role")));
            }
        }
        out
    }

    /// Appends this slot's directed edge list as `slot,i,j,distance_km` rows.
    pub fn write_edge_csv<W: Write>(&self, out: &mut csv::Writer<W>) -> Result<()> {
        for (i, j, d) in self.edges() {
            out.write_record(&[self.slot.to_string(), i.to_string(), j.to_string(), d.to_string()])?;
        }
        Ok(())
    }
}

pub const EDGE_CSV_HEADER: [&str; 4] = ["slot", "i", "j", "distance_km"];

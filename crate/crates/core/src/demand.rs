//! Seeded synthetic demand: zones, carriers, hubs, facilities, parcel jobs
//! and truck supply jobs.
//!
//! Parcels are spread over zones by a multinomial draw on the zone
//! weights, then over carriers by a multinomial draw on market shares
//! inside each zone. Each (zone, carrier) count is cut into jobs of at most
//! `parcel_size` parcels.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Mode, Network};

/// Parcels in one supply-truck load.
pub const TRUCKLOAD: u32 = 800;
/// Default daily parcel capacity of a micro hub.
pub const HUB_DAILY_CAPACITY: u32 = 4000;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("zone weights sum to zero")]
    ZeroWeight,
    #[error("zone `{0}` has a negative or non-finite weight")]
    BadWeight(String),
    #[error("no carriers configured")]
    NoCarriers,
    #[error("market shares sum to {0}, expected 1")]
    SharesNotNormalised(f64),
    #[error("carrier `{0}` has a market share outside [0, 1]")]
    BadShare(String),
    #[error("total_parcels must be positive")]
    NoParcels,
    #[error("parcel_size must be at least 1")]
    BadParcelSize,
    #[error("duplicate {kind} id `{id}`")]
    Duplicate { kind: &'static str, id: String },
    #[error("{kind} `{id}`: {reason}")]
    Placement {
        kind: &'static str,
        id: String,
        reason: String,
    },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: String,
    pub centroid: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Carrier {
    pub id: String,
    pub depot: String,
    pub market_share: f64,
    pub hub_connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hub {
    pub id: String,
    pub node: String,
    #[serde(default = "default_hub_capacity")]
    pub daily_capacity: u32,
}

fn default_hub_capacity() -> u32 {
    HUB_DAILY_CAPACITY
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacilityKind {
    Industry,
    RetailCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Facility {
    pub id: String,
    pub node: String,
    pub kind: FacilityKind,
    /// Truckloads per day.
    pub daily_supply: u32,
    /// Node the supply trucks leave from.
    pub supplier: String,
}

/// Tunnel entrance next to the external logistics centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Portal {
    pub id: String,
    pub node: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParcelJob {
    pub id: String,
    pub customer: String,
    pub size: u32,
    pub carrier: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupplyTarget {
    Hub,
    Facility,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplyJob {
    pub id: String,
    pub target: SupplyTarget,
    /// Hub or facility id.
    pub destination: String,
    pub destination_node: String,
    pub size: u32,
    /// Node the truck starts from.
    pub origin: String,
    /// Owning carrier for hub supply.
    #[serde(default)]
    pub carrier: Option<String>,
}

/// Geography and volumes fed to [`generate_demand`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    pub total_parcels: u32,
    #[serde(default = "one")]
    pub parcel_size: u32,
    pub zones: Vec<Zone>,
    pub carriers: Vec<Carrier>,
    #[serde(default)]
    pub hubs: Vec<Hub>,
    #[serde(default)]
    pub facilities: Vec<Facility>,
    #[serde(default)]
    pub portals: Vec<Portal>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSet {
    pub zones: Vec<Zone>,
    pub carriers: Vec<Carrier>,
    pub hubs: Vec<Hub>,
    pub facilities: Vec<Facility>,
    pub portals: Vec<Portal>,
    pub jobs: Vec<ParcelJob>,
    pub supply_jobs: Vec<SupplyJob>,
}

impl DemandSet {
    pub fn total_parcels(&self) -> u64 {
        self.jobs.iter().map(|j| u64::from(j.size)).sum()
    }

    pub fn carrier(&self, id: &str) -> Option<&Carrier> {
        self.carriers.iter().find(|c| c.id == id)
    }

    pub fn hub(&self, id: &str) -> Option<&Hub> {
        self.hubs.iter().find(|h| h.id == id)
    }

    pub fn facility(&self, id: &str) -> Option<&Facility> {
        self.facilities.iter().find(|f| f.id == id)
    }

    /// Facilities whose node has a tunnel link.
    pub fn tunnel_facilities<'a>(&'a self, network: &Network<f64>) -> BTreeSet<&'a str> {
        self.facilities
            .iter()
            .filter(|f| network.touches_mode(&f.node, Mode::Tunnel))
            .map(|f| f.id.as_str())
            .collect()
    }

    /// Checks that every referenced node exists and sits on the right subgraphs.
    pub fn check_network(&self, network: &Network<f64>) -> Result<(), DemandError> {
        let place = |kind: &'static str, id: &str, reason: String| DemandError::Placement {
            kind,
            id: id.to_string(),
            reason,
        };
        let on = |kind: &'static str, id: &str, node: &str, modes: &[Mode]| -> Result<(), DemandError> {
            if network.node(node).is_none() {
                return Err(place(kind, id, format!("node `{node}` not in network")));
            }
            for &m in modes {
                if !network.touches_mode(node, m) {
                    return Err(place(kind, id, format!("node `{node}` has no {m} link")));
                }
            }
            Ok(())
        };
        for z in &self.zones {
            on("zone", &z.id, &z.centroid, &[Mode::Road])?;
        }
        for c in &self.carriers {
            on("carrier", &c.id, &c.depot, &[Mode::Road])?;
        }
        for h in &self.hubs {
            on("hub", &h.id, &h.node, &[Mode::Road, Mode::Tunnel])?;
        }
        for f in &self.facilities {
            on("facility", &f.id, &f.node, &[Mode::Road])?;
            on("facility", &f.id, &f.supplier, &[Mode::Road])?;
            if f.kind == FacilityKind::Industry {
                on("facility", &f.id, &f.node, &[Mode::Tunnel])?;
            }
        }
        for p in &self.portals {
            on("portal", &p.id, &p.node, &[Mode::Tunnel])?;
        }
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<(), DemandError> {
        let io = |reason: String| DemandError::Io {
            path: path.display().to_string(),
            reason,
        };
        let text = serde_json::to_string_pretty(self).map_err(|e| io(e.to_string()))?;
        fs::write(path, text).map_err(|e| io(e.to_string()))
    }

    pub fn read_json(path: &Path) -> Result<Self, DemandError> {
        let io = |reason: String| DemandError::Io {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| io(e.to_string()))
    }
}

fn check_unique<'a>(kind: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<(), DemandError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(DemandError::Duplicate {
                kind,
                id: id.to_string(),
            });
        }
    }
    Ok(())
}

impl DemandConfig {
    pub fn validate(&self) -> Result<(), DemandError> {
        if self.total_parcels == 0 {
            return Err(DemandError::NoParcels);
        }
        if self.parcel_size == 0 {
            return Err(DemandError::BadParcelSize);
        }
        if self.carriers.is_empty() {
            return Err(DemandError::NoCarriers);
        }
        for z in &self.zones {
            if !(z.weight.is_finite() && z.weight >= 0.0) {
                return Err(DemandError::BadWeight(z.id.clone()));
            }
        }
        if self.zones.iter().map(|z| z.weight).sum::<f64>() <= 0.0 {
            return Err(DemandError::ZeroWeight);
        }
        for c in &self.carriers {
            if !(0.0..=1.0).contains(&c.market_share) {
                return Err(DemandError::BadShare(c.id.clone()));
            }
        }
        let shares: f64 = self.carriers.iter().map(|c| c.market_share).sum();
        if (shares - 1.0).abs() > 1e-9 {
            return Err(DemandError::SharesNotNormalised(shares));
        }
        check_unique("zone", self.zones.iter().map(|z| z.id.as_str()))?;
        check_unique("carrier", self.carriers.iter().map(|c| c.id.as_str()))?;
        check_unique("hub", self.hubs.iter().map(|h| h.id.as_str()))?;
        check_unique("facility", self.facilities.iter().map(|f| f.id.as_str()))?;
        check_unique("portal", self.portals.iter().map(|p| p.id.as_str()))?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self, DemandError> {
        let io = |reason: String| DemandError::Io {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| io(e.to_string()))
    }
}

/// Multinomial draw of `n` trials over `weights` by conditional binomials.
pub fn multinomial(rng: &mut ChaCha8Rng, n: u64, weights: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; weights.len()];
    let mut left = n;
    let mut mass: f64 = weights.iter().sum();
    let last = weights.iter().rposition(|&w| w > 0.0);
    for (i, &w) in weights.iter().enumerate() {
        if left == 0 || Some(i) == last {
            if Some(i) == last {
                out[i] = left;
            }
            break;
        }
        if w <= 0.0 {
            continue;
        }
        let p = (w / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, p).expect("probability in [0, 1]").sample(rng);
        out[i] = k;
        left -= k;
        mass -= w;
    }
    out
}

/// Radial density kernel `exp(-d / scale)` around `center`.
pub fn radial_weights(points: &[(f64, f64)], center: (f64, f64), scale: f64) -> Vec<f64> {
    points
        .iter()
        .map(|&(x, y)| (-((x - center.0).hypot(y - center.1)) / scale).exp())
        .collect()
}

/// Draws parcel jobs and derives supply jobs. Deterministic in `(config, seed)`.
pub fn generate_demand(config: &DemandConfig, seed: u64) -> Result<DemandSet, DemandError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zone_w: Vec<f64> = config.zones.iter().map(|z| z.weight).collect();
    let share_w: Vec<f64> = config.carriers.iter().map(|c| c.market_share).collect();
    let per_zone = multinomial(&mut rng, u64::from(config.total_parcels), &zone_w);

    let mut jobs = Vec::new();
    for (zone, &count) in config.zones.iter().zip(&per_zone) {
        if count == 0 {
            continue;
        }
        let per_carrier = multinomial(&mut rng, count, &share_w);
        for (carrier, &n) in config.carriers.iter().zip(&per_carrier) {
            let mut left = n as u32;
            while left > 0 {
                let size = left.min(config.parcel_size);
                jobs.push(ParcelJob {
                    id: format!("p{:06}", jobs.len() + 1),
                    customer: zone.centroid.clone(),
                    size,
                    carrier: carrier.id.clone(),
                });
                left -= size;
            }
        }
    }

    let mut set = DemandSet {
        zones: config.zones.clone(),
        carriers: config.carriers.clone(),
        hubs: config.hubs.clone(),
        facilities: config.facilities.clone(),
        portals: config.portals.clone(),
        jobs,
        supply_jobs: Vec::new(),
    };
    set.supply_jobs = build_supply_jobs(&set);
    Ok(set)
}

/// One truckload per hub-connected carrier and hub, plus `daily_supply`
/// truckloads per facility.
pub fn build_supply_jobs(set: &DemandSet) -> Vec<SupplyJob> {
    let mut out = Vec::new();
    for hub in &set.hubs {
        for c in set.carriers.iter().filter(|c| c.hub_connected) {
            out.push(SupplyJob {
                id: format!("s-{}-{}", hub.id, c.id),
                target: SupplyTarget::Hub,
                destination: hub.id.clone(),
                destination_node: hub.node.clone(),
                size: TRUCKLOAD,
                origin: c.depot.clone(),
                carrier: Some(c.id.clone()),
            });
        }
    }
    for f in &set.facilities {
        for k in 0..f.daily_supply {
            out.push(SupplyJob {
                id: format!("s-{}-{}", f.id, k + 1),
                target: SupplyTarget::Facility,
                destination: f.id.clone(),
                destination_node: f.node.clone(),
                size: TRUCKLOAD,
                origin: f.supplier.clone(),
                carrier: None,
            });
        }
    }
    out
}

//! Stage two: tunnel shipments derived from hub departures and facility
//! supply, split across shuttle carriers, routed and executed on the
//! tunnel network.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{DemandSet, SupplyTarget};
use crate::network::{Mode, Network, NetworkError};
use crate::scenario::ScenarioKind;
use crate::seed::derive_seed;
use crate::sim::{self, DepartureRecord, SimError, StageOne};
use crate::vrp::{self, FleetEntry, Job, Shipment, Solution, SolverParams, TimeWindow, VehicleType, Violation, VrpError};

/// Cargo may reach the hub at most this long before the tour leaves.
pub const EARLIEST_BEFORE_S: f64 = 3600.0;
/// Cargo must be at the hub at least this long before the tour leaves.
pub const LATEST_BEFORE_S: f64 = 900.0;
const DAY_S: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum ShuttleError {
    #[error("the base case has no shuttle")]
    BaseCase,
    #[error("need at least one shuttle carrier")]
    NoCarriers,
    #[error("no tunnel portal configured")]
    NoPortal,
    #[error("unknown hub `{0}` in departure record")]
    UnknownHub(String),
    #[error("routing shuttle carrier {carrier}")]
    Vrp {
        carrier: String,
        #[source]
        source: VrpError,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShuttleParams {
    /// Number of shuttle carriers the shipments are split over.
    pub carriers: usize,
    /// Constant tunnel speed; `None` keeps the network's tunnel speeds.
    pub tunnel_speed_mps: Option<f64>,
    pub fleet_slack: usize,
}

impl Default for ShuttleParams {
    fn default() -> Self {
        ShuttleParams {
            carriers: 4,
            tunnel_speed_mps: Some(10.0),
            fleet_slack: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShipmentSource {
    /// Feeds a last-mile tour leaving a hub.
    Departure { hub_id: String, tour_id: String },
    /// Facility supply truckload.
    Supply { job_id: String, facility_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuttleShipment {
    pub id: String,
    pub pickup: String,
    pub delivery: String,
    pub size: u32,
    pub window: TimeWindow<f64>,
    pub source: ShipmentSource,
}

/// Lookup tables linking demand to the tunnel.
pub struct ShipmentContext {
    hub_nodes: BTreeMap<String, String>,
    facility_nodes: BTreeMap<String, String>,
    tunnel_facilities: BTreeSet<String>,
    /// Parcel job → depot node it comes from.
    job_origin: BTreeMap<String, String>,
    /// Origin node → portal node.
    portal_of: BTreeMap<String, String>,
}

impl ShipmentContext {
    pub fn new(demand: &DemandSet, network: &Network<f64>) -> Result<Self, ShuttleError> {
        if demand.portals.is_empty() {
            return Err(ShuttleError::NoPortal);
        }
        let depot: BTreeMap<&str, &str> = demand.carriers.iter().map(|c| (c.id.as_str(), c.depot.as_str())).collect();
        let job_origin = demand
            .jobs
            .iter()
            .filter_map(|j| Some((j.id.clone(), depot.get(j.carrier.as_str())?.to_string())))
            .collect();
        let mut origins: BTreeSet<&str> = demand.carriers.iter().map(|c| c.depot.as_str()).collect();
        origins.extend(demand.facilities.iter().map(|f| f.supplier.as_str()));
        origins.extend(demand.hubs.iter().map(|h| h.node.as_str()));
        let mut portal_of = BTreeMap::new();
        for o in origins {
            let Some(oi) = network.node_idx(o) else { continue };
            let best = demand
                .portals
                .iter()
                .filter_map(|p| Some((network.euclidean(oi, network.node_idx(&p.node)?), &p.id, &p.node)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            if let Some((_, _, node)) = best {
                portal_of.insert(o.to_string(), node.clone());
            }
        }
        Ok(ShipmentContext {
            hub_nodes: demand.hubs.iter().map(|h| (h.id.clone(), h.node.clone())).collect(),
            facility_nodes: demand.facilities.iter().map(|f| (f.id.clone(), f.node.clone())).collect(),
            tunnel_facilities: demand.tunnel_facilities(network).into_iter().map(String::from).collect(),
            job_origin,
            portal_of,
        })
    }

    fn portal_for(&self, origin: &str) -> Result<&str, ShuttleError> {
        self.portal_of.get(origin).map(String::as_str).ok_or(ShuttleError::NoPortal)
    }
}

/// Cuts `parcels` into full shuttle loads and a remainder.
pub fn split_sizes(parcels: u32, capacity: u32) -> Vec<u32> {
    let mut out = vec![capacity; (parcels / capacity) as usize];
    if !parcels.is_multiple_of(capacity) {
        out.push(parcels % capacity);
    }
    out
}

/// Hub departure at `d` needs its cargo within `[d - 3600, d - 900]`.
pub fn departure_window(d: f64) -> TimeWindow<f64> {
    TimeWindow {
        earliest: d - EARLIEST_BEFORE_S,
        latest: d - LATEST_BEFORE_S,
    }
}

/// Shipments for every hub departure (cut into shuttle loads) and every
/// truckload to a tunnel-connected facility. Each load is picked up at the
/// portal nearest the depot most of its parcels come from.
pub fn derive_shipments(
    departures: &[DepartureRecord<f64>],
    demand: &DemandSet,
    kind: ScenarioKind,
    ctx: &ShipmentContext,
) -> Result<Vec<ShuttleShipment>, ShuttleError> {
    if !kind.has_shuttle() {
        return Err(ShuttleError::BaseCase);
    }
    let cap = VehicleType::<f64>::freight_shuttle().capacity;
    let mut out = Vec::new();
    for d in departures {
        if d.parcels == 0 {
            warn!("departure {} from {} carries no parcels; skipped", d.tour_id, d.hub_id);
            continue;
        }
        let hub_node = ctx
            .hub_nodes
            .get(&d.hub_id)
            .ok_or_else(|| ShuttleError::UnknownHub(d.hub_id.clone()))?;
        // parcels per origin depot, in origin order
        let mut per_origin: BTreeMap<&str, u32> = BTreeMap::new();
        let mut known = 0;
        for (job, size) in &d.jobs {
            if let Some(o) = ctx.job_origin.get(job) {
                *per_origin.entry(o.as_str()).or_insert(0) += size;
                known += size;
            }
        }
        if known < d.parcels {
            *per_origin.entry(hub_node.as_str()).or_insert(0) += d.parcels - known;
        }
        let mut queue: Vec<(&str, u32)> = per_origin.into_iter().collect();
        let mut head = 0;
        for (k, size) in split_sizes(d.parcels, cap).into_iter().enumerate() {
            // take `size` parcels off the queue, remembering who dominates
            let mut need = size;
            let mut share: Vec<(&str, u32)> = Vec::new();
            while need > 0 {
                let (o, left) = &mut queue[head];
                let take = need.min(*left);
                share.push((o, take));
                *left -= take;
                need -= take;
                if *left == 0 {
                    head += 1;
                }
            }
            let origin = share
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
                .expect("non-empty load")
                .0;
            out.push(ShuttleShipment {
                id: format!("sh-{}-{}", d.tour_id, k + 1),
                pickup: ctx.portal_for(origin)?.to_string(),
                delivery: hub_node.clone(),
                size,
                window: departure_window(d.departure),
                source: ShipmentSource::Departure {
                    hub_id: d.hub_id.clone(),
                    tour_id: d.tour_id.clone(),
                },
            });
        }
    }
    for s in &demand.supply_jobs {
        if s.target != SupplyTarget::Facility || !ctx.tunnel_facilities.contains(&s.destination) {
            continue;
        }
        let node = &ctx.facility_nodes[&s.destination];
        for (k, size) in split_sizes(s.size, cap).into_iter().enumerate() {
            out.push(ShuttleShipment {
                id: format!("sf-{}-{}", s.id, k + 1),
                pickup: ctx.portal_for(&s.origin)?.to_string(),
                delivery: node.clone(),
                size,
                window: TimeWindow {
                    earliest: 0.0,
                    latest: DAY_S,
                },
                source: ShipmentSource::Supply {
                    job_id: s.id.clone(),
                    facility_id: s.destination.clone(),
                },
            });
        }
    }
    Ok(out)
}

/// Round-robin over shipments ranked by (window start, id); each list
/// keeps the input order.
pub fn partition_carriers(shipments: &[ShuttleShipment], k: usize) -> Result<Vec<Vec<ShuttleShipment>>, ShuttleError> {
    if k == 0 {
        return Err(ShuttleError::NoCarriers);
    }
    let mut ranked: Vec<usize> = (0..shipments.len()).collect();
    ranked.sort_by(|&a, &b| {
        let (x, y) = (&shipments[a], &shipments[b]);
        x.window.earliest.total_cmp(&y.window.earliest).then_with(|| x.id.cmp(&y.id))
    });
    let mut slot = vec![0; shipments.len()];
    for (rank, &i) in ranked.iter().enumerate() {
        slot[i] = rank % k;
    }
    let mut out = vec![Vec::new(); k];
    for (i, s) in shipments.iter().enumerate() {
        out[slot[i]].push(s.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuttleViolation {
    pub shipment_id: String,
    /// Positive when late; `None` for an unassigned shipment.
    pub seconds_late_or_early: Option<f64>,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuttlePlan {
    pub id: String,
    pub solution: Solution<f64>,
    /// Cost recomputed from the tours, for cross-checking `solution.total_cost`.
    pub recomputed_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuttleOutcome {
    pub plans: Vec<ShuttlePlan>,
    pub stage: StageOne<f64>,
    pub violations: Vec<ShuttleViolation>,
}

impl ShuttleOutcome {
    pub fn distance_km(&self) -> f64 {
        self.stage.executions.iter().map(|e| e.meters).sum::<f64>() / 1000.0
    }

    pub fn vehicles(&self) -> usize {
        self.plans.iter().map(|p| p.solution.tours.len()).sum()
    }
}

fn solve_partition(
    idx: usize,
    shipments: &[ShuttleShipment],
    tunnel: &Network<f64>,
    solver: &SolverParams<f64>,
    seed: u64,
    params: &ShuttleParams,
) -> Result<(ShuttlePlan, Vec<ShuttleViolation>), ShuttleError> {
    let id = format!("auft-{}", idx + 1);
    let err = |source| ShuttleError::Vrp {
        carrier: id.clone(),
        source,
    };
    let shuttle = VehicleType::<f64>::freight_shuttle();
    let mut per_portal: BTreeMap<&str, u64> = BTreeMap::new();
    let mut locations: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for s in shipments {
        *per_portal.entry(s.pickup.as_str()).or_insert(0) += u64::from(s.size);
        for n in [&s.pickup, &s.delivery] {
            if seen.insert(n.clone()) {
                locations.push(n.clone());
            }
        }
    }
    let fleet: Vec<FleetEntry<f64>> = per_portal
        .iter()
        .map(|(&portal, &parcels)| FleetEntry {
            vehicle_type: shuttle.clone(),
            start: portal.to_string(),
            count: parcels.div_ceil(u64::from(shuttle.capacity)) as usize + params.fleet_slack,
            earliest_start: 0.0,
        })
        .collect();
    let jobs: Vec<Job<f64>> = shipments
        .iter()
        .map(|s| {
            Job::Shipment(Shipment {
                id: s.id.clone(),
                pickup: s.pickup.clone(),
                delivery: s.delivery.clone(),
                size: s.size,
                pickup_window: None,
                delivery_window: s.window,
                pickup_duration: 0.0,
                delivery_duration: 0.0,
            })
        })
        .collect();
    let matrix = tunnel.travel_time_matrix(&locations, Mode::Tunnel)?;
    let matrices = vrp::Matrices::single(Mode::Tunnel, matrix);
    let mut solution = vrp::solve(&jobs, &fleet, &matrices, &solver.with_seed(seed)).map_err(err)?;
    let (recomputed_cost, _) = vrp::route_cost(&solution, &matrices).map_err(err)?;
    let rate = solution.penalties.window_per_second;
    let mut violations: Vec<ShuttleViolation> = vrp::check_feasibility(&solution, &matrices)
        .into_iter()
        .filter_map(|v| match v {
            Violation::TimeWindow { job_id, seconds, .. } => Some(ShuttleViolation {
                shipment_id: job_id,
                seconds_late_or_early: Some(seconds),
                penalty: seconds * rate,
            }),
            _ => None,
        })
        .collect();
    violations.extend(solution.unassigned.iter().map(|u| ShuttleViolation {
        shipment_id: u.job_id.clone(),
        seconds_late_or_early: None,
        penalty: solution.penalties.unassigned,
    }));
    for t in &mut solution.tours {
        t.id = format!("{id}-{}", t.id);
    }
    Ok((
        ShuttlePlan {
            id,
            solution,
            recomputed_cost,
        },
        violations,
    ))
}

/// Routes every partition as a pickup-and-delivery problem and executes
/// the shuttle tours on the tunnel network.
pub fn plan_and_execute(
    partitions: &[Vec<ShuttleShipment>],
    tunnel: &Network<f64>,
    solver: &SolverParams<f64>,
    seed: u64,
    params: &ShuttleParams,
) -> Result<ShuttleOutcome, ShuttleError> {
    let solved: Vec<(ShuttlePlan, Vec<ShuttleViolation>)> = partitions
        .par_iter()
        .enumerate()
        .map(|(i, part)| {
            let s = derive_seed(seed, &format!("auft-{}", i + 1));
            solve_partition(i, part, tunnel, solver, s, params)
        })
        .collect::<Result<_, _>>()?;
    let (plans, violations): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let violations = violations.into_iter().flatten().collect();

    let tours: Vec<_> = plans.iter().flat_map(|p| p.solution.tours.iter().cloned()).collect();
    let stage = sim::execute(&tours, tunnel, &[])?;
    Ok(ShuttleOutcome {
        plans,
        stage,
        violations,
    })
}

//! Scenario definitions: hub allocations and the carrier plans each
//! scenario hands to the router.
//!
//! * `BC`: every carrier delivers from its depot; trucks supply hubs and
//!   facilities.
//! * `SHU`: connected carriers also deliver from their own hub allotments
//!   (800 parcels per carrier and hub).
//! * `WHU`: connected demand is pooled per hub (4000 parcels) and delivered
//!   by one white-label operator per hub.
//! * `WHU_B`: as `WHU`, with cargo bikes at the hubs for nearby customers.
//!
//! In the shuttle scenarios hub supply and supply of tunnel-connected
//! facilities leave the truck plans.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{DemandSet, ParcelJob, SupplyTarget};
use crate::network::{Mode, Network};
use crate::vrp::{FleetEntry, Job, Service, VehicleType};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}` (expected bc, shu, whu or whu-b)")]
    UnknownKind(String),
    #[error("allocation references unknown hub `{0}`")]
    UnknownHub(String),
    #[error("allocation references unknown job `{0}`")]
    UnknownJob(String),
    #[error("the base case takes no hub allocation")]
    AllocationInBaseCase,
    #[error("unknown carrier `{carrier}` on job `{job}`")]
    UnknownCarrier { job: String, carrier: String },
    #[error("hub node `{0}` missing from the network")]
    HubNode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "BC")]
    Bc,
    #[serde(rename = "SHU")]
    Shu,
    #[serde(rename = "WHU")]
    Whu,
    #[serde(rename = "WHU_B")]
    WhuB,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [ScenarioKind::Bc, ScenarioKind::Shu, ScenarioKind::Whu, ScenarioKind::WhuB];

    /// Display name as used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::Bc => "BC",
            ScenarioKind::Shu => "SHU",
            ScenarioKind::Whu => "WHU",
            ScenarioKind::WhuB => "WHU-B",
        }
    }

    /// Lower-case name used for directories and the command line.
    pub fn slug(self) -> &'static str {
        match self {
            ScenarioKind::Bc => "bc",
            ScenarioKind::Shu => "shu",
            ScenarioKind::Whu => "whu",
            ScenarioKind::WhuB => "whu-b",
        }
    }

    pub fn has_shuttle(self) -> bool {
        self != ScenarioKind::Bc
    }

    pub fn white_label(self) -> bool {
        matches!(self, ScenarioKind::Whu | ScenarioKind::WhuB)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ScenarioKind {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "bc" => Ok(ScenarioKind::Bc),
            "shu" => Ok(ScenarioKind::Shu),
            "whu" => Ok(ScenarioKind::Whu),
            "whu-b" => Ok(ScenarioKind::WhuB),
            _ => Err(ScenarioError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    /// Per carrier and hub allotment in `SHU`.
    pub shu_carrier_capacity: u32,
    /// Replaces every hub's daily capacity in `WHU`/`WHU_B` when set.
    pub hub_capacity: Option<u32>,
    /// Customers within this road distance of their hub are bike-eligible.
    pub bike_radius_m: f64,
    /// Customers further than this from every hub are never allocated.
    pub hub_radius_m: Option<f64>,
    /// Vehicles added on top of `ceil(demand / capacity)` per fleet entry.
    pub fleet_slack: usize,
    /// Earliest tour start, seconds since midnight.
    pub tour_start_s: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            shu_carrier_capacity: 800,
            hub_capacity: None,
            bike_radius_m: 3000.0,
            hub_radius_m: None,
            fleet_slack: 2,
            tour_start_s: 8.0 * 3600.0,
        }
    }
}

/// Parcel job id → hub id. Jobs absent from the map leave from their depot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubAllocation {
    pub assignments: BTreeMap<String, String>,
}

impl HubAllocation {
    pub fn hub_of(&self, job_id: &str) -> Option<&str> {
        self.assignments.get(job_id).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Allocated parcels per hub.
    pub fn per_hub(&self, demand: &DemandSet) -> BTreeMap<String, u32> {
        let mut out = BTreeMap::new();
        for j in &demand.jobs {
            if let Some(h) = self.hub_of(&j.id) {
                *out.entry(h.to_string()).or_insert(0) += j.size;
            }
        }
        out
    }

    /// Allocated parcels per (carrier, hub).
    pub fn per_carrier_hub(&self, demand: &DemandSet) -> BTreeMap<(String, String), u32> {
        let mut out = BTreeMap::new();
        for j in &demand.jobs {
            if let Some(h) = self.hub_of(&j.id) {
                *out.entry((j.carrier.clone(), h.to_string())).or_insert(0) += j.size;
            }
        }
        out
    }
}

/// Free-flow road meters from each hub to every node (`None` if unreachable).
pub struct HubDistances {
    hubs: Vec<String>,
    meters: Vec<Vec<Option<f64>>>,
}

impl HubDistances {
    pub fn new(demand: &DemandSet, network: &Network<f64>) -> Result<Self, ScenarioError> {
        let mut meters = Vec::new();
        for h in &demand.hubs {
            let src = network.node_idx(&h.node).ok_or_else(|| ScenarioError::HubNode(h.node.clone()))?;
            let reach = network.search(src, 0.0, Mode::Road, false, None);
            meters.push((0..network.nodes().len()).map(|i| reach.meters(i)).collect());
        }
        Ok(HubDistances {
            hubs: demand.hubs.iter().map(|h| h.id.clone()).collect(),
            meters,
        })
    }

    pub fn meters(&self, hub: usize, node: usize) -> Option<f64> {
        self.meters[hub][node]
    }

    /// Closest hub to a node as (hub index, meters); ties go to the lower hub id.
    pub fn nearest(&self, node: usize) -> Option<(usize, f64)> {
        (0..self.hubs.len())
            .filter_map(|h| self.meters[h][node].map(|m| (h, m)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| self.hubs[a.0].cmp(&self.hubs[b.0])))
    }
}

/// Connected-carrier jobs with their nearest hub, within the catchment radius.
fn candidates<'a>(
    demand: &'a DemandSet,
    network: &Network<f64>,
    dist: &HubDistances,
    params: &ScenarioParams,
) -> Vec<(&'a ParcelJob, usize, f64)> {
    let connected: BTreeSet<&str> = demand
        .carriers
        .iter()
        .filter(|c| c.hub_connected)
        .map(|c| c.id.as_str())
        .collect();
    demand
        .jobs
        .iter()
        .filter(|j| connected.contains(j.carrier.as_str()))
        .filter_map(|j| {
            let node = network.node_idx(&j.customer)?;
            let (h, m) = dist.nearest(node)?;
            params.hub_radius_m.is_none_or(|r| m <= r).then_some((j, h, m))
        })
        .collect()
}

fn by_distance(a: &(&ParcelJob, usize, f64), b: &(&ParcelJob, usize, f64)) -> std::cmp::Ordering {
    a.2.total_cmp(&b.2).then_with(|| a.0.id.cmp(&b.0.id))
}

/// Separated hub usage: per connected carrier and hub, the closest jobs
/// (whose nearest hub it is) up to the carrier allotment.
pub fn allocate_shu(
    demand: &DemandSet,
    network: &Network<f64>,
    params: &ScenarioParams,
) -> Result<HubAllocation, ScenarioError> {
    let dist = HubDistances::new(demand, network)?;
    let mut cand = candidates(demand, network, &dist, params);
    cand.sort_by(by_distance);
    let mut used: BTreeMap<(&str, usize), u32> = BTreeMap::new();
    let mut out = HubAllocation::default();
    for (job, h, _) in cand {
        let load = used.entry((job.carrier.as_str(), h)).or_insert(0);
        if *load + job.size <= params.shu_carrier_capacity {
            *load += job.size;
            out.assignments.insert(job.id.clone(), demand.hubs[h].id.clone());
        }
    }
    Ok(out)
}

/// White-label hub usage: connected demand pooled across carriers,
/// closest-first into the nearest hub until it is full.
pub fn allocate_whu(
    demand: &DemandSet,
    network: &Network<f64>,
    params: &ScenarioParams,
) -> Result<HubAllocation, ScenarioError> {
    let dist = HubDistances::new(demand, network)?;
    let mut cand = candidates(demand, network, &dist, params);
    cand.sort_by(by_distance);
    let mut used = vec![0u32; demand.hubs.len()];
    let mut out = HubAllocation::default();
    for (job, h, _) in cand {
        let cap = params.hub_capacity.unwrap_or(demand.hubs[h].daily_capacity);
        if used[h] + job.size <= cap {
            used[h] += job.size;
            out.assignments.insert(job.id.clone(), demand.hubs[h].id.clone());
        }
    }
    Ok(out)
}

pub fn allocate(
    kind: ScenarioKind,
    demand: &DemandSet,
    network: &Network<f64>,
    params: &ScenarioParams,
) -> Result<HubAllocation, ScenarioError> {
    match kind {
        ScenarioKind::Bc => Ok(HubAllocation::default()),
        ScenarioKind::Shu => allocate_shu(demand, network, params),
        ScenarioKind::Whu | ScenarioKind::WhuB => allocate_whu(demand, network, params),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    /// A carrier's own parcel deliveries.
    Parcel,
    /// Pooled hub deliveries of the shuttle operator.
    WhiteLabel,
    /// Truck supply runs from one origin.
    Supply,
}

/// One routing problem: an owner, its vehicles and its jobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierPlan {
    pub id: String,
    pub kind: PlanKind,
    pub carrier: String,
    pub starts: Vec<String>,
    pub fleet: Vec<FleetEntry<f64>>,
    pub jobs: Vec<Job<f64>>,
}

impl CarrierPlan {
    pub fn parcels(&self) -> u64 {
        self.jobs.iter().map(|j| u64::from(j.size())).sum()
    }
}

fn fleet_entry(vt: VehicleType<f64>, start: &str, parcels: u64, params: &ScenarioParams) -> FleetEntry<f64> {
    let count = parcels.div_ceil(u64::from(vt.capacity)) as usize + params.fleet_slack;
    FleetEntry {
        vehicle_type: vt,
        start: start.to_string(),
        count,
        earliest_start: params.tour_start_s,
    }
}

/// Builds the routing problems of one scenario.
pub fn build_carrier_plans(
    kind: ScenarioKind,
    demand: &DemandSet,
    allocation: &HubAllocation,
    network: &Network<f64>,
    params: &ScenarioParams,
) -> Result<Vec<CarrierPlan>, ScenarioError> {
    if kind == ScenarioKind::Bc && !allocation.is_empty() {
        return Err(ScenarioError::AllocationInBaseCase);
    }
    let known_jobs: BTreeSet<&str> = demand.jobs.iter().map(|j| j.id.as_str()).collect();
    for (job, hub) in &allocation.assignments {
        if !known_jobs.contains(job.as_str()) {
            return Err(ScenarioError::UnknownJob(job.clone()));
        }
        if demand.hub(hub).is_none() {
            return Err(ScenarioError::UnknownHub(hub.clone()));
        }
    }
    for j in &demand.jobs {
        if demand.carrier(&j.carrier).is_none() {
            return Err(ScenarioError::UnknownCarrier {
                job: j.id.clone(),
                carrier: j.carrier.clone(),
            });
        }
    }

    let mut plans = Vec::new();
    let hub_node = |hub: &str| demand.hub(hub).expect("checked above").node.clone();

    // carrier parcel plans
    for c in &demand.carriers {
        let own: Vec<&ParcelJob> = demand.jobs.iter().filter(|j| j.carrier == c.id).collect();
        // start node -> parcels leaving from it
        let mut starts: BTreeMap<String, u64> = BTreeMap::new();
        let mut jobs = Vec::new();
        for j in &own {
            let start = match (kind, allocation.hub_of(&j.id)) {
                (ScenarioKind::Shu, Some(h)) => hub_node(h),
                (ScenarioKind::Whu | ScenarioKind::WhuB, Some(_)) => continue,
                _ => c.depot.clone(),
            };
            *starts.entry(start.clone()).or_insert(0) += u64::from(j.size);
            let mut s = Service::new(j.id.clone(), j.customer.clone(), j.size);
            if kind == ScenarioKind::Shu {
                s.origin = Some(start);
            }
            jobs.push(Job::Service(s));
        }
        if jobs.is_empty() {
            continue;
        }
        // depot first, then hubs in node order
        let mut order: Vec<String> = starts.keys().cloned().collect();
        order.sort_by_key(|s| (s != &c.depot, s.clone()));
        let fleet = order
            .iter()
            .map(|s| fleet_entry(VehicleType::cep_vehicle(), s, starts[s], params))
            .collect();
        plans.push(CarrierPlan {
            id: format!("cep-{}", c.id),
            kind: PlanKind::Parcel,
            carrier: c.id.clone(),
            starts: order,
            fleet,
            jobs,
        });
    }

    // white-label hub plans
    if kind.white_label() {
        let dist = HubDistances::new(demand, network)?;
        for (hi, hub) in demand.hubs.iter().enumerate() {
            let mine: Vec<&ParcelJob> = demand
                .jobs
                .iter()
                .filter(|j| allocation.hub_of(&j.id) == Some(hub.id.as_str()))
                .collect();
            if mine.is_empty() {
                continue;
            }
            let mut parcels = 0u64;
            let mut bike_parcels = 0u64;
            let jobs = mine
                .iter()
                .map(|j| {
                    parcels += u64::from(j.size);
                    let near = network
                        .node_idx(&j.customer)
                        .and_then(|n| dist.meters(hi, n))
                        .is_some_and(|m| m <= params.bike_radius_m);
                    let mut s = Service::new(j.id.clone(), j.customer.clone(), j.size);
                    if near {
                        bike_parcels += u64::from(j.size);
                    } else {
                        s.modes = Some(vec![Mode::Road]);
                    }
                    Job::Service(s)
                })
                .collect();
            let mut fleet = vec![fleet_entry(VehicleType::cep_vehicle(), &hub.node, parcels, params)];
            if kind == ScenarioKind::WhuB && bike_parcels > 0 {
                fleet.push(fleet_entry(VehicleType::cep_cargo_bike(), &hub.node, bike_parcels, params));
            }
            plans.push(CarrierPlan {
                id: format!("wl-{}", hub.id),
                kind: PlanKind::WhiteLabel,
                carrier: format!("wl-{}", hub.id),
                starts: vec![hub.node.clone()],
                fleet,
                jobs,
            });
        }
    }

    // truck supply plans, one per origin
    let tunnel_facilities = demand.tunnel_facilities(network);
    let mut by_origin: BTreeMap<&str, Vec<Job<f64>>> = BTreeMap::new();
    for s in &demand.supply_jobs {
        let shuttled = match s.target {
            SupplyTarget::Hub => true,
            SupplyTarget::Facility => tunnel_facilities.contains(s.destination.as_str()),
        };
        if kind.has_shuttle() && shuttled {
            continue;
        }
        let mut job = Service::new(s.id.clone(), s.destination_node.clone(), s.size);
        job.origin = Some(s.origin.clone());
        by_origin.entry(s.origin.as_str()).or_default().push(Job::Service(job));
    }
    for (origin, jobs) in by_origin {
        let parcels: u64 = jobs.iter().map(|j| u64::from(j.size())).sum();
        plans.push(CarrierPlan {
            id: format!("truck-{origin}"),
            kind: PlanKind::Supply,
            carrier: format!("supply-{origin}"),
            starts: vec![origin.to_string()],
            fleet: vec![fleet_entry(VehicleType::supply_truck(), origin, parcels, params)],
            jobs,
        });
    }
    Ok(plans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{Carrier, Hub, HUB_DAILY_CAPACITY};
    use crate::network::{Link, Node};

    /// Depot D, hubs H1 (x=1000) and H2 (x=3000) on a road line with
    /// customers at x = 0..=4000 step 500; tunnel link between the hubs.
    fn line_city() -> Network<f64> {
        let xs: Vec<i32> = (0..=8).map(|i| i * 500).collect();
        let mut nodes: Vec<Node<f64>> = xs
            .iter()
            .map(|&x| Node {
                id: format!("n{x}"),
                x: f64::from(x),
                y: 0.0,
            })
            .collect();
        nodes.push(Node {
            id: "D".into(),
            x: -5000.0,
            y: 0.0,
        });
        let mut links = Vec::new();
        let mut road = |a: &str, b: &str, len: f64, mode: Mode| {
            for (f, t) in [(a, b), (b, a)] {
                links.push(Link {
                    id: format!("{f}>{t}"),
                    from: f.into(),
                    to: t.into(),
                    length: len,
                    freeflow_speed: 10.0,
                    mode,
                });
            }
        };
        for w in xs.windows(2) {
            road(&format!("n{}", w[0]), &format!("n{}", w[1]), 500.0, Mode::Road);
        }
        road("D", "n0", 5000.0, Mode::Road);
        road("n1000", "n3000", 2000.0, Mode::Tunnel);
        Network::new(nodes, links, vec![]).unwrap()
    }

    fn demand(jobs: Vec<(&str, &str, u32, &str)>, connected: &[&str]) -> DemandSet {
        let carriers: Vec<&str> = vec!["a", "b", "c"];
        DemandSet {
            zones: vec![],
            carriers: carriers
                .iter()
                .map(|c| Carrier {
                    id: c.to_string(),
                    depot: "D".into(),
                    market_share: 1.0 / 3.0,
                    hub_connected: connected.contains(c),
                })
                .collect(),
            hubs: vec![
                Hub {
                    id: "H1".into(),
                    node: "n1000".into(),
                    daily_capacity: HUB_DAILY_CAPACITY,
                },
                Hub {
                    id: "H2".into(),
                    node: "n3000".into(),
                    daily_capacity: HUB_DAILY_CAPACITY,
                },
            ],
            facilities: vec![],
            portals: vec![],
            jobs: jobs
                .into_iter()
                .map(|(id, node, size, carrier)| ParcelJob {
                    id: id.into(),
                    customer: node.into(),
                    size,
                    carrier: carrier.into(),
                })
                .collect(),
            supply_jobs: vec![],
        }
    }

    #[test]
    fn shu_caps_carrier_allotment() {
        // 1000 parcels next to H1 for carrier a
        let jobs: Vec<(String, u32)> = (0..10).map(|i| (format!("j{i}"), 100)).collect();
        let d = demand(jobs.iter().map(|(id, s)| (id.as_str(), "n1000", *s, "a")).collect(), &["a"]);
        let alloc = allocate_shu(&d, &line_city(), &ScenarioParams::default()).unwrap();
        assert_eq!(alloc.per_hub(&d).get("H1"), Some(&800));
        assert_eq!(alloc.assignments.len(), 8);
    }

    #[test]
    fn shu_ignores_unconnected_carriers() {
        let d = demand(vec![("j1", "n1000", 5, "b")], &["a"]);
        let alloc = allocate_shu(&d, &line_city(), &ScenarioParams::default()).unwrap();
        assert!(alloc.is_empty());
    }

    #[test]
    fn equidistant_customer_goes_to_lower_hub_id() {
        // n2000 is 1000 m from both hubs
        let d = demand(vec![("j1", "n2000", 5, "a")], &["a"]);
        let alloc = allocate_shu(&d, &line_city(), &ScenarioParams::default()).unwrap();
        assert_eq!(alloc.hub_of("j1"), Some("H1"));
        let alloc = allocate_whu(&d, &line_city(), &ScenarioParams::default()).unwrap();
        assert_eq!(alloc.hub_of("j1"), Some("H1"));
    }

    #[test]
    fn whu_fills_hub_to_capacity() {
        let jobs: Vec<(String, u32)> = (0..45).map(|i| (format!("j{i:02}"), 100)).collect();
        let d = demand(jobs.iter().map(|(id, s)| (id.as_str(), "n1000", *s, "a")).collect(), &["a"]);
        let alloc = allocate_whu(&d, &line_city(), &ScenarioParams::default()).unwrap();
        assert_eq!(alloc.per_hub(&d).get("H1"), Some(&4000));
        let left: u32 = d.jobs.iter().filter(|j| alloc.hub_of(&j.id).is_none()).map(|j| j.size).sum();
        assert_eq!(left, 500);
    }

    #[test]
    fn whu_takes_everything_under_capacity() {
        let jobs: Vec<(String, u32)> = (0..30).map(|i| (format!("j{i:02}"), 100)).collect();
        let d = demand(jobs.iter().map(|(id, s)| (id.as_str(), "n500", *s, "a")).collect(), &["a"]);
        let alloc = allocate_whu(&d, &line_city(), &ScenarioParams::default()).unwrap();
        assert_eq!(alloc.assignments.len(), 30);
    }

    #[test]
    fn whu_ignores_carrier_labels() {
        let base = vec![
            ("j1", "n0", 300, "a"),
            ("j2", "n500", 900, "b"),
            ("j3", "n1500", 3000, "a"),
            ("j4", "n2500", 700, "b"),
            ("j5", "n4000", 100, "c"),
        ];
        let d1 = demand(base.clone(), &["a", "b"]);
        let swapped: Vec<_> = base
            .iter()
            .map(|&(id, n, s, c)| (id, n, s, if c == "a" { "b" } else if c == "b" { "a" } else { c }))
            .collect();
        let d2 = demand(swapped, &["a", "b"]);
        let p = ScenarioParams::default();
        let net = line_city();
        assert_eq!(allocate_whu(&d1, &net, &p).unwrap(), allocate_whu(&d2, &net, &p).unwrap());
    }

    #[test]
    fn base_case_plans() {
        let mut d = demand(vec![("j1", "n0", 5, "a"), ("j2", "n500", 5, "b")], &["a", "b"]);
        d.supply_jobs = crate::demand::build_supply_jobs(&d);
        let plans = build_carrier_plans(
            ScenarioKind::Bc,
            &d,
            &HubAllocation::default(),
            &line_city(),
            &ScenarioParams::default(),
        )
        .unwrap();
        let parcel: Vec<_> = plans.iter().filter(|p| p.kind == PlanKind::Parcel).collect();
        assert_eq!(parcel.len(), 2);
        assert!(parcel.iter().all(|p| p.starts == ["D"]));
        let trucks: usize = plans.iter().filter(|p| p.kind == PlanKind::Supply).map(|p| p.jobs.len()).sum();
        assert_eq!(trucks, 4);
    }

    #[test]
    fn white_label_plans_drop_hub_supply() {
        let mut d = demand(
            vec![("j1", "n1000", 5, "a"), ("j2", "n3000", 5, "b"), ("j3", "n0", 5, "c")],
            &["a", "b"],
        );
        d.supply_jobs = crate::demand::build_supply_jobs(&d);
        let net = line_city();
        let p = ScenarioParams::default();
        let alloc = allocate_whu(&d, &net, &p).unwrap();
        let whu = build_carrier_plans(ScenarioKind::Whu, &d, &alloc, &net, &p).unwrap();
        let wl: Vec<_> = whu.iter().filter(|p| p.kind == PlanKind::WhiteLabel).collect();
        assert_eq!(wl.len(), 2);
        assert!(whu.iter().all(|p| p.kind != PlanKind::Supply));
        let whub = build_carrier_plans(ScenarioKind::WhuB, &d, &alloc, &net, &p).unwrap();
        let jobs = |plans: &[CarrierPlan]| -> Vec<Job<f64>> { plans.iter().flat_map(|p| p.jobs.clone()).collect() };
        assert_eq!(jobs(&whu), jobs(&whub));
        for plan in whub.iter().filter(|p| p.kind == PlanKind::WhiteLabel) {
            let types: Vec<&str> = plan.fleet.iter().map(|f| f.vehicle_type.name.as_str()).collect();
            assert_eq!(types, ["CEP-Vehicle", "CEP-Cargo-Bike"]);
        }
    }

    #[test]
    fn every_job_planned_once() {
        let jobs: Vec<(String, String, &str)> = (0..40)
            .map(|i| (format!("j{i:02}"), format!("n{}", (i % 9) * 500), ["a", "b", "c"][i % 3]))
            .collect();
        let d = demand(jobs.iter().map(|(id, n, c)| (id.as_str(), n.as_str(), 150, *c)).collect(), &["a", "b"]);
        let net = line_city();
        let p = ScenarioParams::default();
        for kind in ScenarioKind::ALL {
            let alloc = allocate(kind, &d, &net, &p).unwrap();
            let plans = build_carrier_plans(kind, &d, &alloc, &net, &p).unwrap();
            let mut ids: Vec<&str> = plans
                .iter()
                .filter(|p| p.kind != PlanKind::Supply)
                .flat_map(|p| p.jobs.iter().map(|j| j.id()))
                .collect();
            ids.sort_unstable();
            let expect: Vec<&str> = jobs.iter().map(|j| j.0.as_str()).collect();
            assert_eq!(ids, expect, "{kind}");
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("whu-b".parse::<ScenarioKind>().unwrap(), ScenarioKind::WhuB);
        assert_eq!("WHU_B".parse::<ScenarioKind>().unwrap(), ScenarioKind::WhuB);
        assert_eq!("BC".parse::<ScenarioKind>().unwrap(), ScenarioKind::Bc);
        assert!("xyz".parse::<ScenarioKind>().is_err());
        assert_eq!(serde_json::to_string(&ScenarioKind::WhuB).unwrap(), "\"WHU_B\"");
    }
}

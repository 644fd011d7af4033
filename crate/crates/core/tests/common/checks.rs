//! Whole-run invariant checks. Each returns a list of problems, empty when
//! the run is clean.

use std::collections::{BTreeMap, BTreeSet};

use subterra::demand::{DemandSet, SupplyTarget};
use subterra::network::{Mode, Network};
use subterra::pipeline::{PlansFile, ReplicationRun, RunConfig, RunOutcome};
use subterra::scenario::{PlanKind, ScenarioKind};
use subterra::shuttle::{ShipmentSource, EARLIEST_BEFORE_S, LATEST_BEFORE_S};
use subterra::sim::TourExecution;
use subterra::vrp::{ActivityKind, Job, Solution};

pub fn read_plans(config: &RunConfig, kind: ScenarioKind, rep: usize) -> PlansFile {
    let path = config.run_dir(kind, rep).join("plans.json");
    serde_json::from_reader(std::fs::File::open(&path).unwrap()).unwrap()
}

fn runs(outcome: &RunOutcome) -> impl Iterator<Item = (ScenarioKind, usize, &ReplicationRun)> {
    outcome
        .scenarios
        .iter()
        .flat_map(|s| s.replications.iter().enumerate().map(move |(i, r)| (s.kind, i + 1, r)))
}

/// Hub-departure shipments open one hour and close 15 minutes before the tour leaves.
pub fn window_problems(outcome: &RunOutcome) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (kind, rep, run) in runs(outcome) {
        let Some(sh) = &run.shuttle else { continue };
        let dep: BTreeMap<&str, f64> = run
            .stage_one
            .departures
            .iter()
            .map(|d| (d.tour_id.as_str(), d.departure))
            .collect();
        for s in &sh.shipments {
            if let ShipmentSource::Departure { tour_id, .. } = &s.source {
                checked += 1;
                let d = dep[tour_id.as_str()];
                if s.window.earliest != d - EARLIEST_BEFORE_S || s.window.latest != d - LATEST_BEFORE_S {
                    bad.push(format!("{kind}/{rep} {}: window {:?} for departure {d}", s.id, s.window));
                }
            }
        }
    }
    (checked, bad)
}

/// Prefix loads along a planned tour stay inside `[0, capacity]`.
fn load_problems(tag: &str, sol: &Solution<f64>) -> Vec<String> {
    let mut bad = Vec::new();
    for t in &sol.tours {
        let cap = i64::from(t.vehicle_type.capacity);
        let mut load = i64::from(t.initial_load);
        let start: i64 = t
            .activities
            .iter()
            .filter(|a| a.kind == ActivityKind::Service)
            .map(|a| i64::from(a.size))
            .sum();
        if load != start {
            bad.push(format!("{tag} {}: initial load {load} but services sum to {start}", t.id));
        }
        if load > cap {
            bad.push(format!("{tag} {}: starts with {load} > {cap}", t.id));
        }
        for a in &t.activities {
            load += match a.kind {
                ActivityKind::Pickup => i64::from(a.size),
                _ => -i64::from(a.size),
            };
            if !(0..=cap).contains(&load) || load != i64::from(a.load_after) {
                bad.push(format!("{tag} {} at {}: load {load} (reported {})", t.id, a.job_id, a.load_after));
            }
        }
    }
    bad
}

/// Parcels conserved from demand through plans and tours into shuttle
/// shipments; loads within capacity on every tour.
pub fn conservation_problems(config: &RunConfig, demand: &DemandSet, outcome: &RunOutcome) -> Vec<String> {
    let mut bad = Vec::new();
    let demand_ids: BTreeMap<&str, u32> = demand.jobs.iter().map(|j| (j.id.as_str(), j.size)).collect();
    for (kind, rep, run) in runs(outcome) {
        let tag = format!("{kind}/{rep}");
        // demand -> plans
        let plans = read_plans(config, kind, rep);
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut planned = 0u64;
        for p in plans.plans.iter().filter(|p| p.kind != PlanKind::Supply) {
            for j in &p.jobs {
                *seen.entry(j.id().to_string()).or_insert(0) += 1;
                planned += u64::from(j.size());
                if demand_ids.get(j.id()) != Some(&j.size()) {
                    bad.push(format!("{tag}: plan {} job {} not in demand", p.id, j.id()));
                }
            }
        }
        if planned != demand.total_parcels() {
            bad.push(format!("{tag}: plans carry {planned} parcels, demand {}", demand.total_parcels()));
        }
        for id in demand_ids.keys() {
            if seen.get(*id) != Some(&1) {
                bad.push(format!("{tag}: job {id} planned {:?} times", seen.get(*id)));
            }
        }

        // plans -> tours
        let by_plan: BTreeMap<&str, &subterra::scenario::CarrierPlan> = plans.plans.iter().map(|p| (p.id.as_str(), p)).collect();
        for r in &run.solutions.results {
            let p = by_plan[r.plan_id.as_str()];
            let mut served: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &r.solution.tours {
                for a in &t.activities {
                    if a.kind != ActivityKind::Pickup {
                        *served.entry(a.job_id.as_str()).or_insert(0) += a.size;
                    }
                }
            }
            let unassigned: BTreeSet<&str> = r.solution.unassigned.iter().map(|u| u.job_id.as_str()).collect();
            for j in &p.jobs {
                let got = served.get(j.id()).copied().unwrap_or(0);
                let ok = (got == j.size() && !unassigned.contains(j.id())) || (got == 0 && unassigned.contains(j.id()));
                if !ok {
                    bad.push(format!("{tag}: job {} of {} served {got} of {}", j.id(), p.id, j.size()));
                }
            }
            bad.extend(load_problems(&tag, &r.solution));
        }

        // tours -> departures -> shipments
        let initial: BTreeMap<&str, u32> = run.solutions.tours().map(|t| (t.id.as_str(), t.initial_load)).collect();
        let mut departing: BTreeMap<&str, u64> = BTreeMap::new();
        for d in &run.stage_one.departures {
            if initial.get(d.tour_id.as_str()) != Some(&d.parcels) {
                bad.push(format!("{tag}: departure {} has {} parcels, tour loaded {:?}", d.tour_id, d.parcels, initial.get(d.tour_id.as_str())));
            }
            *departing.entry(d.hub_id.as_str()).or_insert(0) += u64::from(d.parcels);
        }
        if let Some(sh) = &run.shuttle {
            let mut to_hub: BTreeMap<&str, u64> = BTreeMap::new();
            let mut to_facility: BTreeMap<&str, u64> = BTreeMap::new();
            for s in &sh.shipments {
                if s.size > 140 {
                    bad.push(format!("{tag}: shipment {} size {}", s.id, s.size));
                }
                match &s.source {
                    ShipmentSource::Departure { hub_id, .. } => *to_hub.entry(hub_id.as_str()).or_insert(0) += u64::from(s.size),
                    ShipmentSource::Supply { facility_id, .. } => {
                        *to_facility.entry(facility_id.as_str()).or_insert(0) += u64::from(s.size)
                    }
                }
            }
            if to_hub != departing {
                bad.push(format!("{tag}: shipments to hubs {to_hub:?} vs departures {departing:?}"));
            }
            for (f, parcels) in &to_facility {
                let supply: u64 = demand
                    .supply_jobs
                    .iter()
                    .filter(|s| s.target == SupplyTarget::Facility && s.destination == *f)
                    .map(|s| u64::from(s.size))
                    .sum();
                if *parcels != supply {
                    bad.push(format!("{tag}: facility {f} gets {parcels} by shuttle, supply {supply}"));
                }
            }
            let mut shipped: BTreeMap<&str, u32> = BTreeMap::new();
            for p in &sh.outcome.plans {
                bad.extend(load_problems(&format!("{tag} {}", p.id), &p.solution));
                for t in &p.solution.tours {
                    for a in &t.activities {
                        if a.kind == ActivityKind::Delivery {
                            *shipped.entry(a.job_id.as_str()).or_insert(0) += a.size;
                        }
                    }
                }
                for u in &p.solution.unassigned {
                    shipped.insert(u.job_id.as_str(), 0);
                }
            }
            for s in &sh.shipments {
                let got = shipped.get(s.id.as_str()).copied();
                if got.is_none() {
                    bad.push(format!("{tag}: shipment {} neither delivered nor unassigned", s.id));
                }
            }
        }
    }
    bad
}

/// Solver-reported cost against the independent recomputation.
pub fn cost_problems(outcome: &RunOutcome) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (kind, rep, run) in runs(outcome) {
        let mut pairs: Vec<(String, f64, f64)> = run
            .solutions
            .results
            .iter()
            .map(|r| (r.plan_id.clone(), r.solution.total_cost, r.recomputed_cost))
            .collect();
        if let Some(sh) = &run.shuttle {
            pairs.extend(sh.outcome.plans.iter().map(|p| (p.id.clone(), p.solution.total_cost, p.recomputed_cost)));
        }
        for (id, reported, recomputed) in pairs {
            checked += 1;
            let rel = (reported - recomputed).abs() / recomputed.abs().max(f64::MIN_POSITIVE);
            if rel > 1e-9 && reported != recomputed {
                bad.push(format!("{kind}/{rep} {id}: reported {reported} recomputed {recomputed}"));
            }
        }
    }
    (checked, bad)
}

/// Link loads times link length reproduce executed distance per vehicle type.
pub fn link_load_problems(network: &Network<f64>, outcome: &RunOutcome) -> Vec<String> {
    let mut bad = Vec::new();
    for (kind, rep, run) in runs(outcome) {
        let mut from_loads: BTreeMap<&str, f64> = BTreeMap::new();
        for l in &run.stage_one.link_loads {
            *from_loads.entry(l.vehicle_type.as_str()).or_insert(0.0) += f64::from(l.count) * network.link(&l.link_id).unwrap().length;
        }
        let mut from_execs: BTreeMap<&str, f64> = BTreeMap::new();
        for e in &run.stage_one.executions {
            *from_execs.entry(e.vehicle_type.as_str()).or_insert(0.0) += e.meters;
        }
        for (vt, m) in &from_execs {
            let l = from_loads.get(vt).copied().unwrap_or(0.0);
            if (l - m).abs() > 1e-6 * m.max(1.0) {
                bad.push(format!("{kind}/{rep} {vt}: link loads {l} m vs executions {m} m"));
            }
        }
    }
    bad
}

/// Realized duration never beats the free-flow plan when profiles only slow traffic down.
pub fn slowdown_problems(outcome: &RunOutcome) -> Vec<String> {
    let mut bad = Vec::new();
    for (kind, rep, run) in runs(outcome) {
        let planned: BTreeMap<&str, f64> = run.solutions.tours().map(|t| (t.id.as_str(), t.arrival - t.departure)).collect();
        for e in &run.stage_one.executions {
            let p = planned[e.tour_id.as_str()];
            if e.seconds + 1e-6 < p {
                bad.push(format!("{kind}/{rep} {}: executed {} s < planned {p} s", e.tour_id, e.seconds));
            }
        }
    }
    bad
}

/// Shuttle tours run in the tunnel only.
pub fn tunnel_problems(network: &Network<f64>, execs: &[TourExecution<f64>]) -> Vec<String> {
    let mut bad = Vec::new();
    for e in execs {
        for t in &e.traversals {
            if network.link(&t.link_id).map(|l| l.mode) != Some(Mode::Tunnel) {
                bad.push(format!("{} uses non-tunnel link {}", e.tour_id, t.link_id));
            }
        }
    }
    bad
}

/// Jobs of every plan keyed by plan id, for cross-scenario comparisons.
pub fn plan_jobs(plans: &PlansFile, kind: PlanKind) -> BTreeMap<String, Vec<Job<f64>>> {
    plans
        .plans
        .iter()
        .filter(|p| p.kind == kind)
        .map(|p| (p.id.clone(), p.jobs.clone()))
        .collect()
}

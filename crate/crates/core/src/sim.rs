//! Tour execution on the time-dependent network.
//!
//! Every leg of a planned tour is rerouted with a time-dependent shortest
//! path at the instant the vehicle actually leaves the previous stop.
//! Stops reached early wait for their window; late arrivals are recorded,
//! not repaired.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::Hub;
use crate::network::{hour_of, Mode, Network};
use crate::scalar::Scalar;
use crate::vrp::{ActivityKind, Tour};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("tour `{tour_id}`: no {mode} path from `{from}` to `{to}` (leg {leg})")]
    Unreachable {
        tour_id: String,
        leg: usize,
        from: String,
        to: String,
        mode: Mode,
    },
    #[error("tour `{tour_id}`: node `{node}` not in network")]
    UnknownNode { tour_id: String, node: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityExecution<T> {
    pub job_id: String,
    pub kind: ActivityKind,
    pub location: String,
    pub arrival: T,
    pub start: T,
    pub departure: T,
    /// Seconds past the window close, zero when on time.
    pub lateness: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traversal<T> {
    pub link_id: String,
    pub enter: T,
    pub exit: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourExecution<T> {
    pub tour_id: String,
    pub vehicle_type: String,
    pub mode: Mode,
    pub start_location: String,
    pub start: T,
    pub end: T,
    pub meters: T,
    pub seconds: T,
    pub initial_load: u32,
    pub capacity: u32,
    pub activities: Vec<ActivityExecution<T>>,
    pub traversals: Vec<Traversal<T>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkLoad {
    pub link_id: String,
    pub hour: u8,
    pub vehicle_type: String,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepartureRecord<T> {
    pub hub_id: String,
    pub tour_id: String,
    pub departure: T,
    pub parcels: u32,
    pub capacity: u32,
    /// Jobs on board at departure with their sizes.
    pub jobs: Vec<(String, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkLoadDelta {
    pub link_id: String,
    pub hour: u8,
    pub vehicle_type: String,
    pub delta: i64,
}

/// Output of executing one set of tours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOne<T> {
    pub executions: Vec<TourExecution<T>>,
    pub link_loads: Vec<LinkLoad>,
    pub departures: Vec<DepartureRecord<T>>,
}

/// Drives one tour from its planned start.
pub fn execute_tour<T: Scalar>(tour: &Tour<T>, network: &Network<T>) -> Result<TourExecution<T>, SimError> {
    let mode = tour.vehicle_type.mode;
    let idx = |node: &str| {
        network.node_idx(node).ok_or_else(|| SimError::UnknownNode {
            tour_id: tour.id.clone(),
            node: node.to_string(),
        })
    };
    let home = idx(&tour.start_location)?;
    let mut stops = Vec::with_capacity(tour.activities.len() + 1);
    for a in &tour.activities {
        stops.push(idx(&a.location)?);
    }
    stops.push(home);

    let mut clock = tour.departure;
    let mut at = home;
    let mut meters = T::zero();
    let mut traversals = Vec::new();
    let mut activities = Vec::with_capacity(tour.activities.len());
    for (leg, &next) in stops.iter().enumerate() {
        if next != at {
            let reach = network.search(at, clock, mode, true, Some(next));
            let links = network.trace(&reach, next).ok_or_else(|| SimError::Unreachable {
                tour_id: tour.id.clone(),
                leg,
                from: network.nodes()[at].id.clone(),
                to: network.nodes()[next].id.clone(),
                mode,
            })?;
            for li in links {
                let dt = network.link_time_idx(li, clock);
                traversals.push(Traversal {
                    link_id: network.links()[li].id.clone(),
                    enter: clock,
                    exit: clock + dt,
                });
                clock = clock + dt;
                meters = meters + network.links()[li].length;
            }
            at = next;
        }
        if let Some(a) = tour.activities.get(leg) {
            let arrival = clock;
            let (start, lateness) = match a.window {
                Some(w) => (arrival.max(w.earliest), w.lateness(arrival)),
                None => (arrival, T::zero()),
            };
            let departure = start + a.duration;
            activities.push(ActivityExecution {
                job_id: a.job_id.clone(),
                kind: a.kind,
                location: a.location.clone(),
                arrival,
                start,
                departure,
                lateness,
            });
            clock = departure;
        }
    }
    Ok(TourExecution {
        tour_id: tour.id.clone(),
        vehicle_type: tour.vehicle_type.name.clone(),
        mode,
        start_location: tour.start_location.clone(),
        start: tour.departure,
        end: clock,
        meters,
        seconds: clock - tour.departure,
        initial_load: tour.initial_load,
        capacity: tour.vehicle_type.capacity,
        activities,
        traversals,
    })
}

/// Vehicle entries per (link, entry hour, vehicle type), sorted.
pub fn link_loads<T: Scalar>(executions: &[TourExecution<T>]) -> Vec<LinkLoad> {
    let mut counts: BTreeMap<(&str, u8, &str), u32> = BTreeMap::new();
    for e in executions {
        for t in &e.traversals {
            *counts
                .entry((t.link_id.as_str(), hour_of(t.enter) as u8, e.vehicle_type.as_str()))
                .or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .map(|((link_id, hour, vt), count)| LinkLoad {
            link_id: link_id.to_string(),
            hour,
            vehicle_type: vt.to_string(),
            count,
        })
        .collect()
}

/// One record per tour that starts at a hub node.
pub fn extract_departures<T: Scalar>(executions: &[TourExecution<T>], hubs: &[Hub]) -> Vec<DepartureRecord<T>> {
    let by_node: BTreeMap<&str, &str> = hubs.iter().map(|h| (h.node.as_str(), h.id.as_str())).collect();
    executions
        .iter()
        .filter_map(|e| {
            let hub = by_node.get(e.start_location.as_str())?;
            Some(DepartureRecord {
                hub_id: hub.to_string(),
                tour_id: e.tour_id.clone(),
                departure: e.start,
                parcels: e.initial_load,
                capacity: e.capacity,
                jobs: Vec::new(),
            })
        })
        .collect()
}

/// Executes all tours (in parallel, merged in input order) and derives
/// link loads and hub departures. Departure records list the service jobs
/// each tour carries from its start.
pub fn execute<T: Scalar>(tours: &[Tour<T>], network: &Network<T>, hubs: &[Hub]) -> Result<StageOne<T>, SimError> {
    let executions: Vec<TourExecution<T>> = tours
        .par_iter()
        .map(|t| execute_tour(t, network))
        .collect::<Result<_, _>>()?;
    let link_loads = link_loads(&executions);
    let mut departures = extract_departures(&executions, hubs);
    let by_id: BTreeMap<&str, &Tour<T>> = tours.iter().map(|t| (t.id.as_str(), t)).collect();
    for d in &mut departures {
        if let Some(t) = by_id.get(d.tour_id.as_str()) {
            d.jobs = t
                .activities
                .iter()
                .filter(|a| a.kind == ActivityKind::Service)
                .map(|a| (a.job_id.clone(), a.size))
                .collect();
        }
    }
    Ok(StageOne {
        executions,
        link_loads,
        departures,
    })
}

/// `variant - base` per (link, hour, vehicle type); missing entries count as zero.
pub fn diff_link_loads(base: &[LinkLoad], variant: &[LinkLoad]) -> Vec<LinkLoadDelta> {
    let mut acc: BTreeMap<(&str, u8, &str), i64> = BTreeMap::new();
    for l in base {
        *acc.entry((&l.link_id, l.hour, &l.vehicle_type)).or_insert(0) -= i64::from(l.count);
    }
    for l in variant {
        *acc.entry((&l.link_id, l.hour, &l.vehicle_type)).or_insert(0) += i64::from(l.count);
    }
    acc.into_iter()
        .map(|((link_id, hour, vt), delta)| LinkLoadDelta {
            link_id: link_id.to_string(),
            hour,
            vehicle_type: vt.to_string(),
            delta,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::HUB_DAILY_CAPACITY;
    use crate::network::{Link, Node, SpeedProfile};
    use crate::vrp::{Activity, VehicleType};

    fn net(profile: Option<f64>) -> Network<f64> {
        let nodes = vec![
            Node { id: "A".into(), x: 0.0, y: 0.0 },
            Node { id: "B".into(), x: 1000.0, y: 0.0 },
        ];
        let links = vec![
            Link {
                id: "AB".into(),
                from: "A".into(),
                to: "B".into(),
                length: 1000.0,
                freeflow_speed: 10.0,
                mode: Mode::Road,
            },
            Link {
                id: "BA".into(),
                from: "B".into(),
                to: "A".into(),
                length: 1000.0,
                freeflow_speed: 10.0,
                mode: Mode::Road,
            },
        ];
        let profiles = profile
            .map(|s| {
                vec![SpeedProfile {
                    link_id: "AB".into(),
                    entries: vec![(8, s)],
                }]
            })
            .unwrap_or_default();
        Network::new(nodes, links, profiles).unwrap()
    }

    fn tour(id: &str, depart: f64) -> Tour<f64> {
        Tour {
            id: id.into(),
            vehicle_type: VehicleType::cep_vehicle(),
            start_location: "A".into(),
            departure: depart,
            arrival: depart + 200.0,
            initial_load: 5,
            meters: 2000.0,
            activities: vec![Activity {
                job_id: "j".into(),
                kind: ActivityKind::Service,
                location: "B".into(),
                size: 5,
                window: None,
                duration: 0.0,
                arrival: depart + 100.0,
                start: depart + 100.0,
                departure: depart + 100.0,
                load_after: 0,
            }],
        }
    }

    #[test]
    fn free_flow_leg() {
        let e = execute_tour(&tour("t", 8.0 * 3600.0), &net(None)).unwrap();
        assert_eq!(e.activities[0].arrival, 8.0 * 3600.0 + 100.0);
        let loads = link_loads(&[e]);
        assert!(loads.contains(&LinkLoad {
            link_id: "AB".into(),
            hour: 8,
            vehicle_type: "CEP-Vehicle".into(),
            count: 1
        }));
    }

    #[test]
    fn slowed_leg_arrives_later() {
        let e = execute_tour(&tour("t", 8.0 * 3600.0), &net(Some(5.0))).unwrap();
        assert_eq!(e.activities[0].arrival, 8.0 * 3600.0 + 200.0);
        assert!(e.seconds >= 200.0);
        assert_eq!(e.meters, 2000.0);
    }

    #[test]
    fn loads_add_up() {
        let n = net(None);
        let s = execute(&[tour("t1", 28_800.0), tour("t2", 29_000.0)], &n, &[]).unwrap();
        let ab = s.link_loads.iter().find(|l| l.link_id == "AB" && l.hour == 8).unwrap();
        assert_eq!(ab.count, 2);
    }

    #[test]
    fn departures_only_from_hubs() {
        let n = net(None);
        let hubs = [Hub {
            id: "H".into(),
            node: "A".into(),
            daily_capacity: HUB_DAILY_CAPACITY,
        }];
        let s = execute(&[tour("t1", 28_800.0)], &n, &hubs).unwrap();
        assert_eq!(s.departures.len(), 1);
        assert_eq!(s.departures[0].hub_id, "H");
        assert_eq!(s.departures[0].departure, 28_800.0);
        assert_eq!(s.departures[0].parcels, 5);
        assert_eq!(s.departures[0].jobs, vec![("j".to_string(), 5)]);
        let s = execute(&[tour("t1", 28_800.0)], &n, &[]).unwrap();
        assert!(s.departures.is_empty());
    }

    #[test]
    fn diff_basics() {
        let l = |link: &str, c| LinkLoad {
            link_id: link.into(),
            hour: 8,
            vehicle_type: "Supply-Truck".into(),
            count: c,
        };
        let base = vec![l("x", 10), l("y", 3)];
        let variant = vec![l("x", 4), l("z", 2)];
        let d = diff_link_loads(&base, &variant);
        assert_eq!(d.iter().find(|d| d.link_id == "x").unwrap().delta, -6);
        let total: i64 = d.iter().map(|d| d.delta).sum();
        assert_eq!(total, 6 - 13);
        assert!(diff_link_loads(&base, &base).iter().all(|d| d.delta == 0));
    }
}

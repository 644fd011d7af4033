//! Cost and feasibility recomputation from a solution's public tour data.
//!
//! Nothing here trusts the planned times stored on activities: each tour is
//! replayed from its departure instant over the matrix.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ActivityKind, Matrices, Solution, TimeWindow, VehicleType, VrpError};
use crate::network::TravelMatrix;
use crate::scalar::{from_u32, Scalar};

/// Cost breakdown of one tour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourCost<T> {
    pub tour_id: String,
    pub vehicle_type: String,
    pub meters: T,
    pub seconds: T,
    pub fixed: T,
    pub distance: T,
    pub time: T,
    pub window_penalty: T,
}

impl<T: Scalar> TourCost<T> {
    /// Operating cost without penalties.
    pub fn operating(&self) -> T {
        self.fixed + self.distance + self.time
    }

    pub fn total(&self) -> T {
        self.operating() + self.window_penalty
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation<T> {
    /// Largest overload along the tour, in parcels.
    Capacity { tour_id: String, excess: u32 },
    Precedence { tour_id: String, job_id: String },
    /// Positive seconds are late arrivals.
    TimeWindow {
        tour_id: String,
        job_id: String,
        activity: ActivityKind,
        seconds: T,
    },
    Unroutable { tour_id: String, location: String },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Stop<T> {
    pub loc: usize,
    pub kind: ActivityKind,
    pub size: u32,
    pub window: Option<TimeWindow<T>>,
    pub duration: T,
}

#[derive(Debug, Clone)]
pub(crate) struct Replay<T> {
    pub meters: T,
    pub departure: T,
    pub end: T,
    /// (arrival, start, departure) per stop.
    pub times: Vec<(T, T, T)>,
    pub lateness: Vec<T>,
    pub initial_load: i64,
    pub loads_after: Vec<i64>,
}

impl<T: Scalar> Replay<T> {
    pub fn seconds(&self) -> T {
        self.end - self.departure
    }

    pub fn total_lateness(&self) -> T {
        self.lateness.iter().copied().fold(T::zero(), |a, b| a + b)
    }

    pub fn max_load(&self) -> i64 {
        self.loads_after.iter().copied().fold(self.initial_load, i64::max)
    }

    pub fn operating_cost(&self, vt: &VehicleType<T>) -> T {
        vt.fixed_cost + vt.variable_cost(self.meters, self.seconds())
    }
}

/// Drives `stops` in order from `start` leaving at `departure`.
pub(crate) fn replay<T: Scalar>(m: &TravelMatrix<T>, start: usize, departure: T, stops: &[Stop<T>]) -> Replay<T> {
    let initial_load: i64 = stops
        .iter()
        .filter(|s| s.kind == ActivityKind::Service)
        .map(|s| s.size as i64)
        .sum();
    let mut load = initial_load;
    let mut t = departure;
    let mut prev = start;
    let mut meters = T::zero();
    let mut times = Vec::with_capacity(stops.len());
    let mut lateness = Vec::with_capacity(stops.len());
    let mut loads_after = Vec::with_capacity(stops.len());
    for s in stops {
        meters = meters + m.meters(prev, s.loc);
        let arrival = t + m.seconds(prev, s.loc);
        let (begin, late) = match s.window {
            Some(w) => (arrival.max(w.earliest), w.lateness(arrival)),
            None => (arrival, T::zero()),
        };
        let leave = begin + s.duration;
        times.push((arrival, begin, leave));
        lateness.push(late);
        load += match s.kind {
            ActivityKind::Pickup => s.size as i64,
            ActivityKind::Service | ActivityKind::Delivery => -(s.size as i64),
        };
        loads_after.push(load);
        t = leave;
        prev = s.loc;
    }
    let end = if stops.is_empty() {
        departure
    } else {
        meters = meters + m.meters(prev, start);
        t + m.seconds(prev, start)
    };
    Replay {
        meters,
        departure,
        end,
        times,
        lateness,
        initial_load,
        loads_after,
    }
}

fn tour_stops<'m, T: Scalar>(
    tour: &super::Tour<T>,
    matrices: &'m Matrices<T>,
) -> Result<(&'m TravelMatrix<T>, usize, Vec<Stop<T>>), VrpError> {
    let mode = tour.vehicle_type.mode;
    let m = matrices.require(mode)?;
    let locate = |id: &str| {
        m.index_of(id).ok_or_else(|| VrpError::UnknownLocation {
            location: id.to_string(),
            mode,
        })
    };
    let start = locate(&tour.start_location)?;
    let stops = tour
        .activities
        .iter()
        .map(|a| {
            Ok(Stop {
                loc: locate(&a.location)?,
                kind: a.kind,
                size: a.size,
                window: a.window,
                duration: a.duration,
            })
        })
        .collect::<Result<Vec<_>, VrpError>>()?;
    Ok((m, start, stops))
}

/// Recomputes every tour's cost from the vehicle rates, plus window and
/// unassigned-job penalties. Returns the solution total and a per-tour
/// breakdown.
pub fn route_cost<T: Scalar>(solution: &Solution<T>, matrices: &Matrices<T>) -> Result<(T, Vec<TourCost<T>>), VrpError> {
    let mut total = T::zero();
    let mut breakdown = Vec::with_capacity(solution.tours.len());
    for tour in &solution.tours {
        let (m, start, stops) = tour_stops(tour, matrices)?;
        let vt = &tour.vehicle_type;
        let cost = if stops.is_empty() {
            TourCost {
                tour_id: tour.id.clone(),
                vehicle_type: vt.name.clone(),
                meters: T::zero(),
                seconds: T::zero(),
                fixed: T::zero(),
                distance: T::zero(),
                time: T::zero(),
                window_penalty: T::zero(),
            }
        } else {
            let r = replay(m, start, tour.departure, &stops);
            TourCost {
                tour_id: tour.id.clone(),
                vehicle_type: vt.name.clone(),
                meters: r.meters,
                seconds: r.seconds(),
                fixed: vt.fixed_cost,
                distance: r.meters * vt.cost_per_meter,
                time: r.seconds() * vt.cost_per_second,
                window_penalty: r.total_lateness() * solution.penalties.window_per_second,
            }
        };
        total = total + cost.total();
        breakdown.push(cost);
    }
    let unassigned: T = from_u32::<T>(solution.unassigned.len() as u32) * solution.penalties.unassigned;
    Ok((total + unassigned, breakdown))
}

/// Lists every broken constraint. Empty iff loads stay within capacity,
/// every pickup precedes its delivery in the same tour, and all windows
/// are met.
pub fn check_feasibility<T: Scalar>(solution: &Solution<T>, matrices: &Matrices<T>) -> Vec<Violation<T>> {
    let mut out = Vec::new();
    for tour in &solution.tours {
        let (m, start, stops) = match tour_stops(tour, matrices) {
            Ok(x) => x,
            Err(e) => {
                let location = match e {
                    VrpError::UnknownLocation { location, .. } => location,
                    other => other.to_string(),
                };
                out.push(Violation::Unroutable {
                    tour_id: tour.id.clone(),
                    location,
                });
                continue;
            }
        };

        // precedence
        let mut seen: HashMap<&str, (Option<usize>, Option<usize>)> = HashMap::new();
        for (i, a) in tour.activities.iter().enumerate() {
            let e = seen.entry(a.job_id.as_str()).or_default();
            match a.kind {
                ActivityKind::Pickup => e.0 = Some(i),
                ActivityKind::Delivery => e.1 = Some(i),
                ActivityKind::Service => {}
            }
        }
        let mut bad: Vec<&str> = seen
            .iter()
            .filter(|(_, (p, d))| match (p, d) {
                (None, None) => false,
                (Some(p), Some(d)) => p > d,
                _ => true,
            })
            .map(|(id, _)| *id)
            .collect();
        bad.sort_unstable();
        for id in bad {
            out.push(Violation::Precedence {
                tour_id: tour.id.clone(),
                job_id: id.to_string(),
            });
        }

        let r = replay(m, start, tour.departure, &stops);
        let excess = r.max_load() - tour.vehicle_type.capacity as i64;
        if excess > 0 {
            out.push(Violation::Capacity {
                tour_id: tour.id.clone(),
                excess: excess as u32,
            });
        }
        for (a, late) in tour.activities.iter().zip(&r.lateness) {
            if *late > T::zero() {
                out.push(Violation::TimeWindow {
                    tour_id: tour.id.clone(),
                    job_id: a.job_id.clone(),
                    activity: a.kind,
                    seconds: *late,
                });
            }
        }
    }
    out
}

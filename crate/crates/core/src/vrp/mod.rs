//! Heterogeneous-fleet vehicle routing with services, pickup-and-delivery
//! shipments and soft time windows.
//!
//! Tours follow one timing rule everywhere (solver, oracle, cost replay):
//! a vehicle leaves its start at `max(earliest_start, e - t0)` where `e` is
//! the earliest window bound of the first stop and `t0` the travel time to
//! it, waits at stops reached before their window opens, and is charged
//! for lateness past the window close. Capacity and pickup-before-delivery
//! precedence are hard constraints.

mod brute;
mod cost;
mod solver;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Mode, TravelMatrix};
use crate::scalar::{lit, Scalar};

pub use brute::{brute_force, BRUTE_FORCE_MAX_ACTIVITIES, BRUTE_FORCE_MAX_JOBS};
pub use cost::{check_feasibility, route_cost, TourCost, Violation};
pub use solver::solve;

pub const CEP_VEHICLE: &str = "CEP-Vehicle";
pub const CEP_CARGO_BIKE: &str = "CEP-Cargo-Bike";
pub const SUPPLY_TRUCK: &str = "Supply-Truck";
pub const FREIGHT_SHUTTLE: &str = "Freight Shuttle";

#[derive(Debug, Error)]
pub enum VrpError {
    #[error("no travel matrix for mode {0}")]
    MissingMatrix(Mode),
    #[error("location `{location}` missing from the {mode} matrix")]
    UnknownLocation { location: String, mode: Mode },
    #[error("instance too large for exhaustive search: {jobs} jobs / {activities} activities")]
    TooLarge { jobs: usize, activities: usize },
    #[error("invalid job `{id}`: {reason}")]
    InvalidJob { id: String, reason: String },
    #[error("invalid fleet: {0}")]
    InvalidFleet(String),
}

/// Cost rates and capacity of one vehicle class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleType<T> {
    pub name: String,
    pub cost_per_meter: T,
    pub cost_per_second: T,
    pub fixed_cost: T,
    pub capacity: u32,
    pub mode: Mode,
}

impl<T: Scalar> VehicleType<T> {
    fn table_row(name: &str, per_m: f64, per_s: f64, fixed: f64, capacity: u32, mode: Mode) -> Self {
        VehicleType {
            name: name.to_string(),
            cost_per_meter: lit(per_m),
            cost_per_second: lit(per_s),
            fixed_cost: lit(fixed),
            capacity,
            mode,
        }
    }

    pub fn cep_vehicle() -> Self {
        Self::table_row(CEP_VEHICLE, 0.00037, 0.0063, 48.8, 230, Mode::Road)
    }

    pub fn cep_cargo_bike() -> Self {
        Self::table_row(CEP_CARGO_BIKE, 0.000103, 0.0033, 3.27, 23, Mode::Bike)
    }

    pub fn supply_truck() -> Self {
        Self::table_row(SUPPLY_TRUCK, 0.00086, 0.008, 140.0, 800, Mode::Road)
    }

    pub fn freight_shuttle() -> Self {
        Self::table_row(FREIGHT_SHUTTLE, 0.00035, 0.002, 30.0, 140, Mode::Tunnel)
    }

    /// The four vehicle classes of the model, in the order above.
    pub fn canonical() -> [Self; 4] {
        [
            Self::cep_vehicle(),
            Self::cep_cargo_bike(),
            Self::supply_truck(),
            Self::freight_shuttle(),
        ]
    }

    /// Distance and time cost of driving `meters` for `seconds`, excluding the fixed cost.
    pub fn variable_cost(&self, meters: T, seconds: T) -> T {
        meters * self.cost_per_meter + seconds * self.cost_per_second
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow<T> {
    pub earliest: T,
    pub latest: T,
}

impl<T: Scalar> TimeWindow<T> {
    pub fn new(earliest: T, latest: T) -> Option<Self> {
        (earliest <= latest).then_some(TimeWindow { earliest, latest })
    }

    pub fn all_day() -> Self {
        TimeWindow {
            earliest: T::zero(),
            latest: lit(86_400.0),
        }
    }

    /// Seconds past `latest`, zero when on time.
    pub fn lateness(&self, arrival: T) -> T {
        (arrival - self.latest).max(T::zero())
    }
}

/// One-sided delivery whose goods board at the vehicle start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Service<T> {
    pub id: String,
    pub location: String,
    pub size: u32,
    #[serde(default)]
    pub window: Option<TimeWindow<T>>,
    #[serde(default)]
    pub duration: T,
    /// Only vehicles starting at this node may serve the job.
    #[serde(default)]
    pub origin: Option<String>,
    /// Vehicle modes allowed to serve the job; `None` allows all.
    #[serde(default)]
    pub modes: Option<Vec<Mode>>,
}

impl<T: Scalar> Service<T> {
    pub fn new(id: impl Into<String>, location: impl Into<String>, size: u32) -> Self {
        Service {
            id: id.into(),
            location: location.into(),
            size,
            window: None,
            duration: T::zero(),
            origin: None,
            modes: None,
        }
    }
}

/// Pickup-and-delivery job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shipment<T> {
    pub id: String,
    pub pickup: String,
    pub delivery: String,
    pub size: u32,
    #[serde(default)]
    pub pickup_window: Option<TimeWindow<T>>,
    pub delivery_window: TimeWindow<T>,
    #[serde(default)]
    pub pickup_duration: T,
    #[serde(default)]
    pub delivery_duration: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", bound(deserialize = "T: Scalar"))]
pub enum Job<T> {
    Service(Service<T>),
    Shipment(Shipment<T>),
}

impl<T: Scalar> Job<T> {
    pub fn id(&self) -> &str {
        match self {
            Job::Service(s) => &s.id,
            Job::Shipment(s) => &s.id,
        }
    }

    pub fn size(&self) -> u32 {
        match self {
            Job::Service(s) => s.size,
            Job::Shipment(s) => s.size,
        }
    }

    pub fn activity_count(&self) -> usize {
        match self {
            Job::Service(_) => 1,
            Job::Shipment(_) => 2,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), VrpError> {
        let bad = |reason: &str| VrpError::InvalidJob {
            id: self.id().to_string(),
            reason: reason.to_string(),
        };
        if self.size() == 0 {
            return Err(bad("size must be at least 1"));
        }
        if let Job::Shipment(s) = self {
            if s.pickup == s.delivery {
                return Err(bad("pickup and delivery coincide"));
            }
        }
        Ok(())
    }
}

/// Vehicles of one type available at one start location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetEntry<T> {
    pub vehicle_type: VehicleType<T>,
    pub start: String,
    pub count: usize,
    #[serde(default)]
    pub earliest_start: T,
}

/// Free-flow matrices per vehicle mode.
#[derive(Debug, Clone, Default)]
pub struct Matrices<T> {
    by_mode: BTreeMap<Mode, TravelMatrix<T>>,
}

impl<T: Scalar> Matrices<T> {
    pub fn new() -> Self {
        Matrices {
            by_mode: BTreeMap::new(),
        }
    }

    pub fn single(mode: Mode, matrix: TravelMatrix<T>) -> Self {
        let mut m = Self::new();
        m.insert(mode, matrix);
        m
    }

    pub fn insert(&mut self, mode: Mode, matrix: TravelMatrix<T>) {
        self.by_mode.insert(mode, matrix);
    }

    pub fn get(&self, mode: Mode) -> Option<&TravelMatrix<T>> {
        self.by_mode.get(&mode)
    }

    pub(crate) fn require(&self, mode: Mode) -> Result<&TravelMatrix<T>, VrpError> {
        self.get(mode).ok_or(VrpError::MissingMatrix(mode))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    Service,
    Pickup,
    Delivery,
}

/// A planned stop. `start` is when work begins (after any waiting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity<T> {
    pub job_id: String,
    pub kind: ActivityKind,
    pub location: String,
    pub size: u32,
    pub window: Option<TimeWindow<T>>,
    pub duration: T,
    pub arrival: T,
    pub start: T,
    pub departure: T,
    pub load_after: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour<T> {
    pub id: String,
    pub vehicle_type: VehicleType<T>,
    pub start_location: String,
    pub departure: T,
    pub arrival: T,
    pub initial_load: u32,
    pub meters: T,
    pub activities: Vec<Activity<T>>,
}

impl<T: Scalar> Tour<T> {
    pub fn seconds(&self) -> T {
        self.arrival - self.departure
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unassigned {
    pub job_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalties<T> {
    pub window_per_second: T,
    pub unassigned: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution<T> {
    pub tours: Vec<Tour<T>>,
    pub unassigned: Vec<Unassigned>,
    pub total_cost: T,
    pub penalty_cost: T,
    pub penalties: Penalties<T>,
}

impl<T: Scalar> Solution<T> {
    pub fn empty(penalties: Penalties<T>) -> Self {
        Solution {
            tours: Vec::new(),
            unassigned: Vec::new(),
            total_cost: T::zero(),
            penalty_cost: T::zero(),
            penalties,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams<T> {
    pub seed: u64,
    pub iterations: usize,
    pub ruin_fraction: f64,
    pub window_penalty_per_second: T,
    pub unassigned_penalty: T,
}

impl<T: Scalar> Default for SolverParams<T> {
    fn default() -> Self {
        SolverParams {
            seed: 0,
            iterations: 2000,
            ruin_fraction: 0.2,
            window_penalty_per_second: lit(10.0),
            unassigned_penalty: lit(10_000.0),
        }
    }
}

impl<T: Scalar> SolverParams<T> {
    pub fn penalties(&self) -> Penalties<T> {
        Penalties {
            window_per_second: self.window_penalty_per_second,
            unassigned: self.unassigned_penalty,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SolverParams { seed, ..self.clone() }
    }
}

/// Departure rule shared by every tour evaluator.
#[inline]
pub(crate) fn planned_departure<T: Scalar>(earliest_start: T, first_window: Option<TimeWindow<T>>, to_first: T) -> T {
    match first_window {
        Some(w) => earliest_start.max(w.earliest - to_first),
        None => earliest_start,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_rates() {
        let [cep, bike, truck, shuttle] = VehicleType::<f64>::canonical();
        assert_eq!((cep.cost_per_meter, cep.cost_per_second, cep.fixed_cost, cep.capacity), (0.00037, 0.0063, 48.8, 230));
        assert_eq!((bike.cost_per_meter, bike.cost_per_second, bike.fixed_cost, bike.capacity), (0.000103, 0.0033, 3.27, 23));
        assert_eq!((truck.cost_per_meter, truck.cost_per_second, truck.fixed_cost, truck.capacity), (0.00086, 0.008, 140.0, 800));
        assert_eq!(
            (shuttle.cost_per_meter, shuttle.cost_per_second, shuttle.fixed_cost, shuttle.capacity),
            (0.00035, 0.002, 30.0, 140)
        );
        assert_eq!(bike.mode, Mode::Bike);
        assert_eq!(shuttle.mode, Mode::Tunnel);
    }

    #[test]
    fn time_window_rejects_inverted() {
        assert!(TimeWindow::new(10.0, 5.0).is_none());
        let w = TimeWindow::new(25_200.0, 27_900.0).unwrap();
        assert_eq!(w.lateness(28_200.0), 300.0);
        assert_eq!(w.lateness(20_000.0), 0.0);
    }

    #[test]
    fn job_json_is_tagged() {
        let job = Job::Service(Service::<f64>::new("s1", "n1", 3));
        let text = serde_json::to_string(&job).unwrap();
        assert!(text.contains("\"type\":\"service\""), "{text}");
        let back: Job<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, job);
    }
}

//! Deterministic urban freight simulator with an underground shuttle stage.
//!
//! Stage one routes each carrier's parcels and supply runs on the road (and
//! bike) network and executes the tours against hourly speed profiles.
//! Stage two turns hub departures into time-windowed tunnel shipments and
//! routes the freight shuttles. KPIs compare the base case against the
//! shuttle scenarios.

pub mod city;
pub mod demand;
pub mod kpi;
pub mod network;
pub mod pipeline;
pub mod scalar;
pub mod scenario;
pub mod seed;
pub mod shuttle;
pub mod sim;
pub mod vrp;

pub use scalar::Scalar;

pub type Network = network::Network<f64>;
pub type TravelMatrix = network::TravelMatrix<f64>;
pub type Path = network::Path<f64>;
pub type VehicleType = vrp::VehicleType<f64>;
pub type Job = vrp::Job<f64>;
pub type Solution = vrp::Solution<f64>;
pub type SolverParams = vrp::SolverParams<f64>;

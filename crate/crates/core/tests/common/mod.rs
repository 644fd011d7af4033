//! Instance builders shared by the integration tests.
#![allow(dead_code)]

pub mod checks;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subterra::network::{Mode, TravelMatrix};
use subterra::pipeline::RunConfig;
use subterra::vrp::{FleetEntry, Job, Matrices, Service, Shipment, SolverParams, TimeWindow, VehicleType};

pub struct Instance {
    pub jobs: Vec<Job<f64>>,
    pub fleet: Vec<FleetEntry<f64>>,
    pub matrices: Matrices<f64>,
}

/// Up to 7 jobs on random points, two vehicles with the canonical rates.
/// Sizes make capacity bind and some jobs carry time windows.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_jobs = rng.random_range(1..=7);
    let n_points = n_jobs * 2 + 1;
    let points: Vec<(f64, f64)> = (0..n_points)
        .map(|_| (rng.random_range(0.0..8000.0), rng.random_range(0.0..8000.0)))
        .collect();
    let ids: Vec<String> = (0..n_points).map(|i| format!("x{i}")).collect();
    let speed = 9.0;
    let matrix = TravelMatrix::from_fn(ids.clone(), |i, j| {
        let d = (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1);
        // detour factor keeps the metric non-Euclidean but triangle-consistent
        let m = d * 1.3;
        (m / speed, m)
    });

    let mut activities = 0;
    let mut jobs = Vec::new();
    for k in 0..n_jobs {
        let timed = rng.random_bool(0.3);
        let window = timed.then(|| {
            let open = 8.0 * 3600.0 + rng.random_range(0.0..3600.0);
            TimeWindow::new(open, open + rng.random_range(300.0..2400.0)).unwrap()
        });
        if activities + 2 <= 12 && rng.random_bool(0.3) {
            activities += 2;
            jobs.push(Job::Shipment(Shipment {
                id: format!("s{k}"),
                pickup: ids[1 + 2 * k].clone(),
                delivery: ids[2 + 2 * k].clone(),
                size: rng.random_range(20..=140),
                pickup_window: None,
                delivery_window: window.unwrap_or_else(TimeWindow::all_day),
                pickup_duration: 60.0,
                delivery_duration: 60.0,
            }));
        } else {
            activities += 1;
            let mut s = Service::new(format!("j{k}"), ids[1 + 2 * k].clone(), rng.random_range(10..=120));
            s.window = window;
            s.duration = rng.random_range(0.0..300.0);
            jobs.push(Job::Service(s));
        }
    }
    let fleet = if rng.random_bool(0.5) {
        vec![FleetEntry {
            vehicle_type: VehicleType::cep_vehicle(),
            start: ids[0].clone(),
            count: 2,
            earliest_start: 8.0 * 3600.0,
        }]
    } else {
        vec![
            FleetEntry {
                vehicle_type: VehicleType::cep_vehicle(),
                start: ids[0].clone(),
                count: 1,
                earliest_start: 8.0 * 3600.0,
            },
            FleetEntry {
                vehicle_type: VehicleType::supply_truck(),
                start: ids[0].clone(),
                count: 1,
                earliest_start: 8.0 * 3600.0,
            },
        ]
    };
    Instance {
        jobs,
        fleet,
        matrices: Matrices::single(Mode::Road, matrix),
    }
}

pub fn solver(seed: u64) -> SolverParams<f64> {
    SolverParams {
        seed,
        iterations: 500,
        ..SolverParams::default()
    }
}

/// A shrunken toy city that runs every stage in a few seconds.
pub fn small_config(out: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.city.total_parcels = 2000;
    c.solver.iterations = 100;
    c.replications = 1;
    c.output_dir = out.to_path_buf();
    c
}

//! End-to-end orchestration: demand, plans, routing, execution, shuttle
//! stage and KPIs, with every intermediate written to disk so each stage
//! can be rerun on its own.
//!
//! Layout under the output directory:
//!
//! ```text
//! network/{nodes,links,profiles}.csv   demand.json
//! <scenario>/<rep>/plans.json solutions.json executions.{csv,json}
//!     link_loads.csv departures.{csv,json} tour_lengths.csv kpi_report.json
//!     shuttle_shipments.{csv,json} shuttle_solutions.json
//!     shuttle_executions.{csv,json} shuttle_violations.csv     (not in BC)
//! <scenario>/kpi_mean.json             comparison.csv
//! ```

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::city::CityConfig;
use crate::demand::{generate_demand, DemandConfig, DemandSet};
use crate::kpi::{self, aggregate_replications, EmissionFactors, KpiReport};
use crate::network::{load_network_dir, Mode, Network};
use crate::scenario::{self, CarrierPlan, HubAllocation, PlanKind, ScenarioKind, ScenarioParams};
use crate::seed::derive_seed;
use crate::shuttle::{self, ShipmentContext, ShuttleOutcome, ShuttleParams, ShuttleShipment};
use crate::sim::{self, DepartureRecord, LinkLoad, StageOne, TourExecution};
use crate::vrp::{self, Matrices, Solution, SolverParams};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Generate,
    Plan,
    Simulate,
    Shuttle,
    Report,
    Compare,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Generate => "generate",
            Stage::Plan => "plan",
            Stage::Simulate => "simulate",
            Stage::Shuttle => "shuttle",
            Stage::Report => "report",
            Stage::Compare => "compare",
        }
    }
}

#[derive(Debug, Error)]
#[error("{} stage failed", stage.name())]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: BoxError,
}

impl PipelineError {
    fn new(stage: Stage, source: impl Into<BoxError>) -> Self {
        PipelineError {
            stage,
            source: source.into(),
        }
    }
}

trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<BoxError>> StageExt<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}

fn all_scenarios() -> Vec<ScenarioKind> {
    ScenarioKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub replications: usize,
    #[serde(default = "all_scenarios")]
    pub scenarios: Vec<ScenarioKind>,
    /// Synthetic city used when no network directory is given.
    pub city: CityConfig,
    /// Directory with nodes.csv, links.csv and profiles.csv.
    pub network_dir: Option<PathBuf>,
    /// Demand generator input; overrides the city's own.
    pub demand_config: Option<PathBuf>,
    /// Ready-made demand; skips generation.
    pub demand_file: Option<PathBuf>,
    pub scenario: ScenarioParams,
    pub solver: SolverParams<f64>,
    pub shuttle: ShuttleParams,
    pub emission_factors: EmissionFactors<f64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            replications: 3,
            scenarios: all_scenarios(),
            city: CityConfig::default(),
            network_dir: None,
            demand_config: None,
            demand_file: None,
            scenario: ScenarioParams::default(),
            solver: SolverParams::default(),
            shuttle: ShuttleParams::default(),
            emission_factors: EmissionFactors::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("no scenarios selected")]
    NoScenarios,
    #[error("{0} does not exist")]
    MissingPath(String),
    #[error("a network directory needs a demand config or demand file")]
    NetworkWithoutDemand,
    #[error("shuttle carriers must be at least 1")]
    NoShuttleCarriers,
    #[error("ruin fraction must lie in (0, 1], got {0}")]
    RuinFraction(f64),
    #[error("tunnel speed must be positive, got {0}")]
    TunnelSpeed(f64),
}

impl RunConfig {
    pub fn read_json(path: &Path) -> Result<Self, PipelineError> {
        let file = File::open(path).map_err(|e| PipelineError::new(Stage::Config, format!("{}: {e}", path.display())))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| PipelineError::new(Stage::Config, format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |e: ConfigError| Err(PipelineError::new(Stage::Config, e));
        if self.replications == 0 {
            return err(ConfigError::NoReplications);
        }
        if self.scenarios.is_empty() {
            return err(ConfigError::NoScenarios);
        }
        for p in [&self.network_dir, &self.demand_config, &self.demand_file].into_iter().flatten() {
            if !p.exists() {
                return err(ConfigError::MissingPath(p.display().to_string()));
            }
        }
        if self.network_dir.is_some() && self.demand_config.is_none() && self.demand_file.is_none() {
            return err(ConfigError::NetworkWithoutDemand);
        }
        if self.shuttle.carriers == 0 {
            return err(ConfigError::NoShuttleCarriers);
        }
        let rf = self.solver.ruin_fraction;
        if !(rf > 0.0 && rf <= 1.0) {
            return err(ConfigError::RuinFraction(rf));
        }
        if let Some(v) = self.shuttle.tunnel_speed_mps {
            if !(v > 0.0 && v.is_finite()) {
                return err(ConfigError::TunnelSpeed(v));
            }
        }
        self.emission_factors.validate().at(Stage::Config)
    }

    /// Scenarios in canonical order without duplicates.
    pub fn scenario_list(&self) -> Vec<ScenarioKind> {
        self.scenarios.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn run_dir(&self, kind: ScenarioKind, rep: usize) -> PathBuf {
        self.output_dir.join(kind.slug()).join(rep.to_string())
    }

    fn rep_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, &format!("rep-{rep}"))
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), BoxError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, BoxError> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(serde_json::from_reader(BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, BoxError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// Network and demand shared by every scenario and replication.
pub struct Inputs {
    pub network: Network<f64>,
    pub demand: DemandSet,
}

impl Inputs {
    /// Builds or loads the network, generates or loads demand, and
    /// writes both under the output directory.
    pub fn prepare(config: &RunConfig) -> Result<Self, PipelineError> {
        let t0 = Instant::now();
        let (network, city_demand) = match &config.network_dir {
            Some(dir) => (load_network_dir(dir).at(Stage::Generate)?, None),
            None => {
                let (n, d) = config.city.build().at(Stage::Generate)?;
                (n, Some(d))
            }
        };
        let demand = match (&config.demand_file, &config.demand_config) {
            (Some(file), _) => DemandSet::read_json(file).at(Stage::Generate)?,
            (None, Some(cfg)) => {
                let dc = DemandConfig::read_json(cfg).at(Stage::Generate)?;
                generate_demand(&dc, derive_seed(config.seed, "demand")).at(Stage::Generate)?
            }
            (None, None) => {
                let dc = city_demand.expect("validated: city provides demand geography");
                generate_demand(&dc, derive_seed(config.seed, "demand")).at(Stage::Generate)?
            }
        };
        demand.check_network(&network).at(Stage::Generate)?;
        network.write_dir(&config.output_dir.join("network")).at(Stage::Generate)?;
        demand.write_json(&config.output_dir.join("demand.json")).at(Stage::Generate)?;
        info!(
            "stage=generate nodes={} links={} jobs={} parcels={} supply_jobs={} secs={:.2}",
            network.nodes().len(),
            network.links().len(),
            demand.jobs.len(),
            demand.total_parcels(),
            demand.supply_jobs.len(),
            t0.elapsed().as_secs_f64()
        );
        Ok(Inputs { network, demand })
    }

    /// Reads what [`Inputs::prepare`] wrote.
    pub fn load(output_dir: &Path) -> Result<Self, PipelineError> {
        let network = load_network_dir(&output_dir.join("network")).at(Stage::Generate)?;
        let demand = DemandSet::read_json(&output_dir.join("demand.json")).at(Stage::Generate)?;
        Ok(Inputs { network, demand })
    }

    pub fn load_or_prepare(config: &RunConfig) -> Result<Self, PipelineError> {
        if config.output_dir.join("demand.json").exists() && config.output_dir.join("network").is_dir() {
            Self::load(&config.output_dir)
        } else {
            Self::prepare(config)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlansFile {
    pub scenario: ScenarioKind,
    pub replication: usize,
    pub allocation: HubAllocation,
    pub plans: Vec<CarrierPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub plan_id: String,
    pub kind: PlanKind,
    pub carrier: String,
    pub seed: u64,
    pub solution: Solution<f64>,
    /// Cost recomputed from the tours with the vehicle rates.
    pub recomputed_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionsFile {
    pub scenario: ScenarioKind,
    pub replication: usize,
    pub results: Vec<PlanResult>,
}

impl SolutionsFile {
    pub fn tours(&self) -> impl Iterator<Item = &vrp::Tour<f64>> {
        self.results.iter().flat_map(|r| r.solution.tours.iter())
    }
}

/// Free-flow matrices for every mode used by a plan's fleet.
pub fn plan_matrices(plan: &CarrierPlan, network: &Network<f64>) -> Result<Matrices<f64>, BoxError> {
    let mut locations: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    let starts = plan.fleet.iter().map(|f| f.start.as_str());
    let stops = plan.jobs.iter().flat_map(|j| match j {
        vrp::Job::Service(s) => vec![s.location.as_str()],
        vrp::Job::Shipment(s) => vec![s.pickup.as_str(), s.delivery.as_str()],
    });
    for loc in starts.chain(stops) {
        if seen.insert(loc) {
            locations.push(loc.to_string());
        }
    }
    let modes: BTreeSet<Mode> = plan.fleet.iter().map(|f| f.vehicle_type.mode).collect();
    let mut m = Matrices::new();
    for mode in modes {
        // a mode's matrix only needs the locations that mode can reach
        let locs: Vec<String> = if mode == Mode::Road {
            locations.clone()
        } else {
            locations.iter().filter(|l| network.touches_mode(l, mode)).cloned().collect()
        };
        m.insert(mode, network.travel_time_matrix(&locs, mode)?);
    }
    Ok(m)
}

fn solve_plan(plan: &CarrierPlan, network: &Network<f64>, solver: &SolverParams<f64>, seed: u64) -> Result<PlanResult, BoxError> {
    let matrices = plan_matrices(plan, network).map_err(|e| format!("plan {}: {e}", plan.id))?;
    let mut solution =
        vrp::solve(&plan.jobs, &plan.fleet, &matrices, &solver.with_seed(seed)).map_err(|e| format!("plan {}: {e}", plan.id))?;
    let (recomputed_cost, _) = vrp::route_cost(&solution, &matrices)?;
    for t in &mut solution.tours {
        t.id = format!("{}-{}", plan.id, t.id);
    }
    Ok(PlanResult {
        plan_id: plan.id.clone(),
        kind: plan.kind,
        carrier: plan.carrier.clone(),
        seed,
        solution,
        recomputed_cost,
    })
}

/// Builds and solves every routing problem of one scenario replication.
pub fn plan(inputs: &Inputs, config: &RunConfig, kind: ScenarioKind, rep: usize) -> Result<SolutionsFile, PipelineError> {
    let t0 = Instant::now();
    let allocation = scenario::allocate(kind, &inputs.demand, &inputs.network, &config.scenario).at(Stage::Plan)?;
    let plans =
        scenario::build_carrier_plans(kind, &inputs.demand, &allocation, &inputs.network, &config.scenario).at(Stage::Plan)?;
    let dir = config.run_dir(kind, rep);
    let file = PlansFile {
        scenario: kind,
        replication: rep,
        allocation,
        plans,
    };
    write_json(&dir.join("plans.json"), &file).at(Stage::Plan)?;

    let rep_seed = config.rep_seed(rep);
    let results: Vec<PlanResult> = file
        .plans
        .par_iter()
        .map(|p| solve_plan(p, &inputs.network, &config.solver, derive_seed(rep_seed, &p.id)))
        .collect::<Result<_, _>>()
        .at(Stage::Plan)?;
    let out = SolutionsFile {
        scenario: kind,
        replication: rep,
        results,
    };
    write_json(&dir.join("solutions.json"), &out).at(Stage::Plan)?;
    info!(
        "stage=plan scenario={} rep={} plans={} jobs={} tours={} unassigned={} cost={:.2} secs={:.2}",
        kind,
        rep,
        file.plans.len(),
        file.plans.iter().map(|p| p.jobs.len()).sum::<usize>(),
        out.tours().count(),
        out.results.iter().map(|r| r.solution.unassigned.len()).sum::<usize>(),
        out.results.iter().map(|r| r.solution.total_cost).sum::<f64>(),
        t0.elapsed().as_secs_f64()
    );
    Ok(out)
}

pub fn write_executions_csv(path: &Path, execs: &[TourExecution<f64>]) -> Result<(), BoxError> {
    let mut w = csv_writer(path)?;
    w.write_record(["tour_id", "vehicle_type", "start_s", "end_s", "total_m", "total_s"])?;
    for e in execs {
        w.write_record([
            e.tour_id.clone(),
            e.vehicle_type.clone(),
            e.start.to_string(),
            e.end.to_string(),
            e.meters.to_string(),
            e.seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_link_loads_csv(path: &Path, loads: &[LinkLoad]) -> Result<(), BoxError> {
    let mut w = csv_writer(path)?;
    w.write_record(["link_id", "hour", "vehicle_type", "count"])?;
    for l in loads {
        w.write_record([l.link_id.clone(), l.hour.to_string(), l.vehicle_type.clone(), l.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_departures_csv(path: &Path, deps: &[DepartureRecord<f64>]) -> Result<(), BoxError> {
    let mut w = csv_writer(path)?;
    w.write_record(["hub_id", "tour_id", "departure_s", "parcels"])?;
    for d in deps {
        w.write_record([d.hub_id.clone(), d.tour_id.clone(), d.departure.to_string(), d.parcels.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Executes every planned ground tour on the time-dependent network.
pub fn simulate(inputs: &Inputs, config: &RunConfig, solutions: &SolutionsFile) -> Result<StageOne<f64>, PipelineError> {
    let t0 = Instant::now();
    let tours: Vec<_> = solutions.tours().cloned().collect();
    let stage = sim::execute(&tours, &inputs.network, &inputs.demand.hubs).at(Stage::Simulate)?;
    let dir = config.run_dir(solutions.scenario, solutions.replication);
    write_executions_csv(&dir.join("executions.csv"), &stage.executions).at(Stage::Simulate)?;
    write_json(&dir.join("executions.json"), &stage.executions).at(Stage::Simulate)?;
    write_link_loads_csv(&dir.join("link_loads.csv"), &stage.link_loads).at(Stage::Simulate)?;
    write_departures_csv(&dir.join("departures.csv"), &stage.departures).at(Stage::Simulate)?;
    write_json(&dir.join("departures.json"), &stage.departures).at(Stage::Simulate)?;
    info!(
        "stage=simulate scenario={} rep={} tours={} km={:.1} late_stops={} departures={} secs={:.2}",
        solutions.scenario,
        solutions.replication,
        stage.executions.len(),
        stage.executions.iter().map(|e| e.meters).sum::<f64>() / 1000.0,
        stage
            .executions
            .iter()
            .flat_map(|e| &e.activities)
            .filter(|a| a.lateness > 0.0)
            .count(),
        stage.departures.len(),
        t0.elapsed().as_secs_f64()
    );
    Ok(stage)
}

pub fn write_shipments_csv(path: &Path, shipments: &[ShuttleShipment]) -> Result<(), BoxError> {
    let mut w = csv_writer(path)?;
    w.write_record(["id", "pickup_node", "delivery_node", "size", "window_start_s", "window_end_s"])?;
    for s in shipments {
        w.write_record([
            s.id.clone(),
            s.pickup.clone(),
            s.delivery.clone(),
            s.size.to_string(),
            s.window.earliest.to_string(),
            s.window.latest.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_violations_csv(path: &Path, outcome: &ShuttleOutcome) -> Result<(), BoxError> {
    let mut w = csv_writer(path)?;
    w.write_record(["shipment_id", "seconds_late_or_early", "penalty"])?;
    for v in &outcome.violations {
        w.write_record([
            v.shipment_id.clone(),
            v.seconds_late_or_early.map(|s| s.to_string()).unwrap_or_default(),
            v.penalty.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Tunnel network with the configured constant shuttle speed.
pub fn tunnel_network(inputs: &Inputs, params: &ShuttleParams) -> Result<Network<f64>, PipelineError> {
    match params.tunnel_speed_mps {
        Some(v) => inputs.network.with_mode_speed(Mode::Tunnel, v).at(Stage::Shuttle),
        None => Ok(inputs.network.clone()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShuttleStage {
    pub shipments: Vec<ShuttleShipment>,
    pub outcome: ShuttleOutcome,
}

/// Derives, partitions, routes and executes the tunnel shipments.
pub fn run_shuttle(
    inputs: &Inputs,
    config: &RunConfig,
    kind: ScenarioKind,
    rep: usize,
    departures: &[DepartureRecord<f64>],
) -> Result<ShuttleStage, PipelineError> {
    let t0 = Instant::now();
    let ctx = ShipmentContext::new(&inputs.demand, &inputs.network).at(Stage::Shuttle)?;
    let shipments = shuttle::derive_shipments(departures, &inputs.demand, kind, &ctx).at(Stage::Shuttle)?;
    let dir = config.run_dir(kind, rep);
    write_shipments_csv(&dir.join("shuttle_shipments.csv"), &shipments).at(Stage::Shuttle)?;
    write_json(&dir.join("shuttle_shipments.json"), &shipments).at(Stage::Shuttle)?;
    let parts = shuttle::partition_carriers(&shipments, config.shuttle.carriers).at(Stage::Shuttle)?;
    let tunnel = tunnel_network(inputs, &config.shuttle)?;
    let seed = derive_seed(config.rep_seed(rep), "shuttle");
    let outcome = shuttle::plan_and_execute(&parts, &tunnel, &config.solver, seed, &config.shuttle).at(Stage::Shuttle)?;
    write_json(&dir.join("shuttle_solutions.json"), &outcome.plans).at(Stage::Shuttle)?;
    write_executions_csv(&dir.join("shuttle_executions.csv"), &outcome.stage.executions).at(Stage::Shuttle)?;
    write_json(&dir.join("shuttle_executions.json"), &outcome.stage.executions).at(Stage::Shuttle)?;
    write_violations_csv(&dir.join("shuttle_violations.csv"), &outcome).at(Stage::Shuttle)?;
    info!(
        "stage=shuttle scenario={} rep={} shipments={} parcels={} tours={} km={:.1} violations={} secs={:.2}",
        kind,
        rep,
        shipments.len(),
        shipments.iter().map(|s| u64::from(s.size)).sum::<u64>(),
        outcome.vehicles(),
        outcome.distance_km(),
        outcome.violations.len(),
        t0.elapsed().as_secs_f64()
    );
    Ok(ShuttleStage { shipments, outcome })
}

/// KPIs for one replication from ground and shuttle executions.
pub fn report(
    config: &RunConfig,
    kind: ScenarioKind,
    rep: usize,
    ground: &[TourExecution<f64>],
    shuttle: &[TourExecution<f64>],
) -> Result<KpiReport<f64>, PipelineError> {
    let all: Vec<TourExecution<f64>> = ground.iter().chain(shuttle).cloned().collect();
    let r = KpiReport::from_executions(kind, &all, &config.emission_factors).at(Stage::Report)?;
    let dir = config.run_dir(kind, rep);
    let rows = kpi::tour_length_table(&all);
    let file = File::create(dir.join("tour_lengths.csv")).at(Stage::Report)?;
    kpi::write_tour_lengths(&rows, BufWriter::new(file)).at(Stage::Report)?;
    write_json(&dir.join("kpi_report.json"), &r).at(Stage::Report)?;
    info!(
        "stage=report scenario={} rep={} total_km={:.1} ground_km={:.1} shuttle_km={:.1} bike_km={:.1} load={:.3} co2_t={:.4}",
        kind,
        rep,
        r.total_distance_km,
        r.ground_distance_km,
        r.shuttle_distance_km,
        r.bike_distance_km,
        r.average_ground_vehicle_load.unwrap_or(f64::NAN),
        r.co2_total_t
    );
    Ok(r)
}

/// Rebuilds a replication's report from the executions on disk.
pub fn report_from_disk(config: &RunConfig, kind: ScenarioKind, rep: usize) -> Result<KpiReport<f64>, PipelineError> {
    let dir = config.run_dir(kind, rep);
    let ground: Vec<TourExecution<f64>> = read_json(&dir.join("executions.json")).at(Stage::Report)?;
    let shuttle: Vec<TourExecution<f64>> = if kind.has_shuttle() {
        read_json(&dir.join("shuttle_executions.json")).at(Stage::Report)?
    } else {
        Vec::new()
    };
    report(config, kind, rep, &ground, &shuttle)
}

pub fn write_mean(config: &RunConfig, reports: &[KpiReport<f64>]) -> Result<KpiReport<f64>, PipelineError> {
    let mean = aggregate_replications(reports).at(Stage::Report)?;
    write_json(&config.output_dir.join(mean.scenario.slug()).join("kpi_mean.json"), &mean).at(Stage::Report)?;
    Ok(mean)
}

pub fn read_mean(config: &RunConfig, kind: ScenarioKind) -> Result<KpiReport<f64>, PipelineError> {
    read_json(&config.output_dir.join(kind.slug()).join("kpi_mean.json")).at(Stage::Compare)
}

/// Writes comparison.csv over the given scenario means.
pub fn write_comparison(config: &RunConfig, means: &[KpiReport<f64>]) -> Result<PathBuf, PipelineError> {
    let path = config.output_dir.join("comparison.csv");
    let file = File::create(&path).at(Stage::Compare)?;
    kpi::write_comparison(means, BufWriter::new(file)).at(Stage::Compare)?;
    Ok(path)
}

/// Everything one replication of one scenario produces.
#[derive(Debug, Clone)]
pub struct ReplicationRun {
    pub solutions: SolutionsFile,
    pub stage_one: StageOne<f64>,
    pub shuttle: Option<ShuttleStage>,
    pub report: KpiReport<f64>,
}

pub fn run_replication(inputs: &Inputs, config: &RunConfig, kind: ScenarioKind, rep: usize) -> Result<ReplicationRun, PipelineError> {
    let solutions = plan(inputs, config, kind, rep)?;
    let stage_one = simulate(inputs, config, &solutions)?;
    let shuttle = if kind.has_shuttle() {
        Some(run_shuttle(inputs, config, kind, rep, &stage_one.departures)?)
    } else {
        None
    };
    let shuttle_execs = shuttle.as_ref().map(|s| s.outcome.stage.executions.as_slice()).unwrap_or(&[]);
    let report = report(config, kind, rep, &stage_one.executions, shuttle_execs)?;
    Ok(ReplicationRun {
        solutions,
        stage_one,
        shuttle,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub kind: ScenarioKind,
    pub replications: Vec<ReplicationRun>,
    pub mean: KpiReport<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenarios: Vec<ScenarioRun>,
    pub comparison: PathBuf,
}

impl RunOutcome {
    pub fn scenario(&self, kind: ScenarioKind) -> Option<&ScenarioRun> {
        self.scenarios.iter().find(|s| s.kind == kind)
    }
}

/// Full pipeline for every configured scenario and replication.
pub fn run(config: &RunConfig) -> Result<RunOutcome, PipelineError> {
    config.validate()?;
    let inputs = Inputs::prepare(config)?;
    let mut scenarios = Vec::new();
    for kind in config.scenario_list() {
        let replications: Vec<ReplicationRun> = (1..=config.replications)
            .map(|rep| run_replication(&inputs, config, kind, rep))
            .collect::<Result<_, _>>()?;
        let reports: Vec<_> = replications.iter().map(|r| r.report.clone()).collect();
        let mean = write_mean(config, &reports)?;
        scenarios.push(ScenarioRun {
            kind,
            replications,
            mean,
        });
    }
    let means: Vec<_> = scenarios.iter().map(|s| s.mean.clone()).collect();
    let comparison = write_comparison(config, &means)?;
    Ok(RunOutcome { scenarios, comparison })
}

pub fn read_solutions(config: &RunConfig, kind: ScenarioKind, rep: usize) -> Result<SolutionsFile, PipelineError> {
    read_json(&config.run_dir(kind, rep).join("solutions.json")).at(Stage::Simulate)
}

pub fn read_departures(config: &RunConfig, kind: ScenarioKind, rep: usize) -> Result<Vec<DepartureRecord<f64>>, PipelineError> {
    read_json(&config.run_dir(kind, rep).join("departures.json")).at(Stage::Shuttle)
}

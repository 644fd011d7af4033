use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use clap::{Parser, Subcommand};
use log::info;

use subterra::kpi::compare;
use subterra::pipeline::{self, Inputs, RunConfig};
use subterra::scenario::ScenarioKind;

/// Urban freight simulation with an underground shuttle stage.
#[derive(Debug, Parser)]
#[command(name = "subterra", version)]
struct Cli {
    /// JSON run configuration; built-in toy city when omitted.
    #[arg(long, global = true, env = "SUBTERRA_CONFIG")]
    config: Option<PathBuf>,
    /// bc, shu, whu, whu-b or all.
    #[arg(long, global = true, env = "SUBTERRA_SCENARIO")]
    scenario: Option<ScenarioArg>,
    #[arg(long, global = true, env = "SUBTERRA_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "SUBTERRA_REPLICATIONS")]
    replications: Option<usize>,
    #[arg(long, global = true, env = "SUBTERRA_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or load the network and generate demand.
    Generate,
    /// Allocate hubs, build carrier plans and solve them.
    Plan,
    /// Execute planned tours on the time-dependent network.
    Simulate,
    /// Derive, route and execute tunnel shipments.
    Shuttle,
    /// Compute KPIs per replication and their mean.
    Report,
    /// Compare scenario means against the base case.
    Compare,
    /// Every stage, every scenario.
    Run,
}

#[derive(Debug, Clone)]
enum ScenarioArg {
    All,
    One(ScenarioKind),
}

impl FromStr for ScenarioArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(ScenarioArg::All);
        }
        ScenarioKind::from_str(s).map(ScenarioArg::One).map_err(|e| e.to_string())
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::read_json(p)?,
        None => RunConfig::default(),
    };
    match &cli.scenario {
        Some(ScenarioArg::All) => config.scenarios = ScenarioKind::ALL.to_vec(),
        Some(ScenarioArg::One(k)) => config.scenarios = vec![*k],
        None => {}
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(r) = cli.replications {
        config.replications = r;
    }
    if let Some(o) = &cli.out {
        config.output_dir = o.clone();
    }
    config.validate()?;
    Ok(config)
}

fn reps(config: &RunConfig) -> impl Iterator<Item = usize> {
    1..=config.replications
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SUBTERRA_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(e) = execute(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    match cli.command {
        Command::Generate => {
            Inputs::prepare(&config)?;
        }
        Command::Plan => {
            let inputs = Inputs::load_or_prepare(&config)?;
            for kind in config.scenario_list() {
                for rep in reps(&config) {
                    pipeline::plan(&inputs, &config, kind, rep)?;
                }
            }
        }
        Command::Simulate => {
            let inputs = Inputs::load(&config.output_dir)?;
            for kind in config.scenario_list() {
                for rep in reps(&config) {
                    let sol = pipeline::read_solutions(&config, kind, rep)?;
                    pipeline::simulate(&inputs, &config, &sol)?;
                }
            }
        }
        Command::Shuttle => {
            let inputs = Inputs::load(&config.output_dir)?;
            for kind in config.scenario_list() {
                if !kind.has_shuttle() {
                    info!("stage=shuttle scenario={kind} skipped=no_shuttle");
                    continue;
                }
                for rep in reps(&config) {
                    let deps = pipeline::read_departures(&config, kind, rep)?;
                    pipeline::run_shuttle(&inputs, &config, kind, rep, &deps)?;
                }
            }
        }
        Command::Report => {
            for kind in config.scenario_list() {
                let reports = reps(&config)
                    .map(|rep| pipeline::report_from_disk(&config, kind, rep))
                    .collect::<Result<Vec<_>, _>>()?;
                pipeline::write_mean(&config, &reports)?;
            }
        }
        Command::Compare => {
            let kinds = config.scenario_list();
            let means = kinds
                .iter()
                .map(|&k| pipeline::read_mean(&config, k))
                .collect::<Result<Vec<_>, _>>()?;
            let path = pipeline::write_comparison(&config, &means)?;
            print_comparison(&means);
            info!("stage=compare wrote={}", path.display());
        }
        Command::Run => {
            let outcome = pipeline::run(&config)?;
            let means: Vec<_> = outcome.scenarios.iter().map(|s| s.mean.clone()).collect();
            print_comparison(&means);
            info!("stage=run wrote={}", outcome.comparison.display());
        }
    }
    Ok(())
}

fn print_comparison(means: &[subterra::kpi::KpiReport<f64>]) {
    let Some(base) = means.iter().find(|m| m.scenario == ScenarioKind::Bc) else {
        for m in means {
            println!("{:<6} total {:>10.1} km  CO2 {:>8.3} t", m.scenario.label(), m.total_distance_km, m.co2_total_t);
        }
        return;
    };
    for m in means {
        let c = compare(base, m);
        let pct = |f: &str| match c.get(f).and_then(|d| d.pct) {
            Some(p) => format!("{p:+.1}%"),
            None => "n/a".to_string(),
        };
        println!(
            "{:<6} total {:>10.1} km ({:>7})  CO2 {:>8.3} t ({:>7})",
            m.scenario.label(),
            m.total_distance_km,
            pct("total_km"),
            m.co2_total_t,
            pct("co2_total_t"),
        );
    }
}

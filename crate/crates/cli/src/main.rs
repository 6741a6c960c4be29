use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use reconfig_sched::experiment::{self, ExperimentConfig, RunSummary};
use reconfig_sched::runtime::ManagerKind;
use reconfig_sched::{Error, Scenario, ScenarioBuilder};

const EXIT_IO: u8 = 3;
const EXIT_INPUT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "reconfig-sched",
    version,
    about = "Power-capped scheduling experiments on reconfigurable multicores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario: scenario.toml, profiles.csv and training.csv.
    Generate {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "scenario")]
        out: PathBuf,
    },
    /// Run one or more managers and write quanta.csv and summary.json.
    Run {
        #[command(flatten)]
        exp: Experiment,
        /// Comma-separated constant caps; omit to keep the scenario's cap schedule.
        #[arg(long, value_delimiter = ',')]
        caps: Vec<f64>,
    },
    /// Sweep constant power caps and write sweep.csv.
    Sweep {
        #[command(flatten)]
        exp: Experiment,
        #[arg(long, value_delimiter = ',', default_value = "0.9,0.8,0.7,0.6,0.5")]
        caps: Vec<f64>,
    },
}

#[derive(Args)]
struct Source {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Cores in the generated scenario, one application per core.
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(2..))]
    apps: u64,
    /// Big/small cores instead of reconfigurable ones.
    #[arg(long)]
    hetero: bool,
}

#[derive(Args)]
struct Experiment {
    /// Saved scenario.toml; when absent a scenario is generated from --seed/--apps/--hetero.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    source: Source,
    /// Comma-separated managers; defaults to every manager the core space supports.
    #[arg(long, value_delimiter = ',')]
    managers: Vec<ManagerKind>,
    #[arg(long, default_value_t = 1000.0)]
    duration_ms: f64,
    /// SGD workers per reconstruction.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    quantum_ms: Option<f64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

impl Source {
    fn build(&self) -> reconfig_sched::Result<Scenario> {
        ScenarioBuilder::new(self.seed, self.apps as usize).hetero(self.hetero).build()
    }
}

impl Experiment {
    fn prepare(&self, caps: Vec<f64>) -> reconfig_sched::Result<(Scenario, ExperimentConfig)> {
        let sc = match &self.scenario {
            Some(path) => Scenario::load(path)?,
            None => self.source.build()?,
        };
        let managers = if self.managers.is_empty() {
            ManagerKind::ALL.into_iter().filter(|m| m.supports(&sc.space)).collect()
        } else {
            self.managers.clone()
        };
        let cfg = ExperimentConfig {
            managers,
            caps,
            duration_ms: self.duration_ms,
            workers: self.workers,
            quantum_ms: self.quantum_ms,
        };
        cfg.validate(&sc)?;
        Ok((sc, cfg))
    }
}

fn generate(source: &Source, out: &Path) -> reconfig_sched::Result<()> {
    let sc = source.build()?;
    sc.save(out)?;
    println!(
        "apps={} training={} space_hash={} config={} out={}",
        sc.apps.len(),
        sc.training.len(),
        sc.space.hash(),
        sc.config_hash(),
        out.display()
    );
    Ok(())
}

fn report(summaries: &[RunSummary]) {
    for s in summaries {
        let cap = s.cap.map_or("schedule".to_string(), |c| c.to_string());
        println!(
            "{:<20} cap={:<8} normalized={:.4} mean_power={:.3} qos_met={}",
            s.manager,
            cap,
            s.normalized_instr,
            s.mean_power,
            s.qos_met_fraction.map_or("-".to_string(), |f| format!("{f:.3}"))
        );
        if s.infeasible_quanta > 0 || s.over_budget_ms > 0.0 {
            warn!(
                "{} at cap {cap}: {} infeasible quanta, {:.1} ms over budget",
                s.manager, s.infeasible_quanta, s.over_budget_ms
            );
        }
    }
}

fn run(cli: Cli) -> reconfig_sched::Result<()> {
    match cli.command {
        Command::Generate { source, out } => generate(&source, &out),
        Command::Run { exp, caps } => {
            let (sc, cfg) = exp.prepare(caps)?;
            info!("running {} manager(s) for {} ms", cfg.managers.len(), cfg.duration_ms);
            let output = experiment::write_run(&sc, &cfg, &exp.out)?;
            report(&output.summaries);
            println!("wrote {} and {}", output.quanta_csv.display(), output.summary_json.display());
            Ok(())
        }
        Command::Sweep { exp, caps } => {
            let (sc, cfg) = exp.prepare(caps)?;
            info!("sweeping {} caps over {} manager(s)", cfg.caps.len(), cfg.managers.len());
            let (path, rows) = experiment::write_sweep(&sc, &cfg, &exp.out)?;
            for r in &rows {
                println!("{:<20} cap={:<6} normalized={:.4}", r.manager, r.cap, r.normalized_instr);
            }
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RECONFIG_SCHED_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

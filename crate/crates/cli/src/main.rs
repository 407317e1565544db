use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use railyard_core::pipeline::{
    self, parse_config, summarize, write_scenario_inputs, write_timings, CaseSelection,
    ExperimentConfig, PipelineError, PolicySelection,
};
use railyard_core::scenario::{generate_scenarios, load_series_csv, SeriesSpec};

#[derive(Debug, Parser)]
#[command(name = "railyard", version, about = "Railway station EV charging and energy dispatch simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full experiment: charging policies, dispatch cases and the summary table.
    Run {
        /// Also write per-scenario wall-clock times to timings.csv.
        #[arg(long)]
        timings: bool,
    },
    /// Simulate the charging policies only.
    SimulateEv,
    /// Solve the dispatch cases with a given EV load profile.
    SolveEms {
        /// CSV with columns `step,p_ev_kw`, one row per time step.
        #[arg(long)]
        profile: PathBuf,
    },
    /// Write each scenario's input series and EV sessions as CSV.
    GenScenarios,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Optimized,
    Uncoordinated,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    scenarios: Option<usize>,
    /// Output directory [default: config `out_dir`, else `out`].
    #[arg(long, global = true, env = "RAILYARD_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long, global = true, value_enum)]
    case: Option<CaseArg>,
    /// Relative MILP gap, e.g. 0.005.
    #[arg(long, global = true)]
    gap: Option<f64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => parse_config(path).map_err(|e| Failure::new("config", e))?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.scenarios {
            c.scenarios = v;
        }
        if let Some(v) = self.policy {
            c.policy = match v {
                PolicyArg::Optimized => PolicySelection::Optimized,
                PolicyArg::Uncoordinated => PolicySelection::Uncoordinated,
                PolicyArg::Both => PolicySelection::Both,
            };
        }
        if let Some(v) = self.case {
            c.case = match v {
                CaseArg::One => CaseSelection::One,
                CaseArg::Two => CaseSelection::Two,
                CaseArg::Both => CaseSelection::Both,
            };
        }
        if let Some(v) = self.gap {
            c.solver.gap = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if let Some(out) = &self.out {
            c.out_dir = Some(out.clone());
        }
        c.validate().map_err(|e| Failure::new("config", e))?;
        Ok(c)
    }
}

/// An error with the stage it came from, reported as JSON on stderr.
struct Failure {
    stage: &'static str,
    error: anyhow::Error,
}

impl Failure {
    fn new(stage: &'static str, error: impl Into<anyhow::Error>) -> Self {
        Self {
            stage,
            error: error.into(),
        }
    }

    fn to_json(&self) -> String {
        let chain: Vec<String> = self.error.chain().skip(1).map(|e| e.to_string()).collect();
        serde_json::json!({
            "error": {
                "stage": self.stage,
                "message": format!("{}: {}", self.stage, self.error),
                "causes": chain,
            }
        })
        .to_string()
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Self::new(e.stage(), e)
    }
}

fn out_dir(config: &ExperimentConfig) -> PathBuf {
    config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn read_profile(path: &Path, config: &ExperimentConfig) -> Result<Vec<f64>, Failure> {
    load_series_csv(path, SeriesSpec::non_negative("p_ev_kw"), &config.grid)
        .with_context(|| format!("reading EV profile {}", path.display()))
        .map_err(|e| Failure::new("input", e))
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let config = cli.overrides.load()?;
    let dir = out_dir(&config);
    match &cli.command {
        Command::Run { timings } => {
            let e = pipeline::run_experiment_to(&config, &dir)?;
            if *timings {
                write_timings(&e.report, &dir.join("timings.csv"))?;
            }
            print!("{}", summarize(&e.report));
        }
        Command::SimulateEv => {
            let e = pipeline::run_charging_to(&config, &dir)?;
            print!("{}", summarize(&e.report));
        }
        Command::SolveEms { profile } => {
            let p_ev = read_profile(profile, &config)?;
            let e = pipeline::run_dispatch_to(&config, &p_ev, &dir)?;
            print!("{}", summarize(&e.report));
        }
        Command::GenScenarios => {
            let scenarios = generate_scenarios(&config.scenario_config(), config.seed, config.scenarios)
                .map_err(|e| Failure::new("scenario", e))?;
            for s in &scenarios {
                write_scenario_inputs(s, &dir)?;
            }
            println!("wrote {} scenario(s) to {}", scenarios.len(), dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::FAILURE
        }
    }
}

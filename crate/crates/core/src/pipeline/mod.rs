//! End-to-end experiment: scenario generation, both charging policies, the
//! dispatch MILP (case 1) and the grid-only reference (case 2), aggregated
//! over equiprobable scenarios.

mod config;
mod export;
mod report;

use std::time::Instant;

use rayon::prelude::*;

use crate::ems::{baseline_cost, solve_ems, EmsSolution};
use crate::ev::{simulate_day, ChargingMode, ChargingProfile, DayOptions};
use crate::scenario::{generate_scenario, Scenario};

pub use config::{
    parse_config, parse_config_str, CaseSelection, ConfigError, EmsOptions, ExchangeLimits,
    ExperimentConfig, PolicySelection, SolverLimits,
};
pub use export::{write_experiment, write_scenario_inputs, write_scenario_outputs, write_timings};
pub use report::{percent_saving, summarize, Aggregates, Report, ScenarioRow, Timings};

/// Step of the per-scenario workflow, used to locate failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    ChargingOptimized,
    ChargingUncoordinated,
    DispatchCase1,
    DispatchCase2,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Generate => "generate",
            Self::ChargingOptimized => "charging-optimized",
            Self::ChargingUncoordinated => "charging-uncoordinated",
            Self::DispatchCase1 => "dispatch-case1",
            Self::DispatchCase2 => "dispatch-case2",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario {scenario}, stage {stage}: {source}")]
    Scenario {
        scenario: usize,
        stage: Stage,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("EV profile has {found} steps, the time grid has {expected}")]
    ProfileLength { expected: usize, found: usize },
    #[error("{path}: {message}")]
    Export { path: String, message: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Scenario { stage, .. } => match stage {
                Stage::Generate => "scenario",
                Stage::ChargingOptimized | Stage::ChargingUncoordinated => "ev",
                Stage::DispatchCase1 | Stage::DispatchCase2 => "ems",
            },
            Self::ProfileLength { .. } => "ems",
            Self::Export { .. } => "export",
            Self::Pool(_) => "pipeline",
        }
    }
}

/// Everything computed for one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub optimized: Option<ChargingProfile>,
    pub uncoordinated: Option<ChargingProfile>,
    /// Case 1 dispatch.
    pub dispatch: Option<EmsSolution>,
    pub row: ScenarioRow,
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: Report,
    pub results: Vec<ScenarioResult>,
}

/// Where the EV load fixed into the dispatch problems comes from.
#[derive(Debug, Clone, Copy)]
enum EvLoad<'a> {
    Simulated,
    /// No dispatch problems are solved.
    ChargingOnly,
    Given(&'a [f64]),
}

/// Runs the full experiment described by `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment, PipelineError> {
    run(config, EvLoad::Simulated).map_err(|(e, _)| e)
}

/// Simulates the selected charging policies only.
pub fn run_charging(config: &ExperimentConfig) -> Result<Experiment, PipelineError> {
    run(config, EvLoad::ChargingOnly).map_err(|(e, _)| e)
}

/// Solves the selected dispatch cases with the EV load fixed to `p_ev_kw`
/// in every scenario; no charging policy is simulated.
pub fn run_dispatch(config: &ExperimentConfig, p_ev_kw: &[f64]) -> Result<Experiment, PipelineError> {
    if p_ev_kw.len() != config.grid.steps() {
        return Err(PipelineError::ProfileLength {
            expected: config.grid.steps(),
            found: p_ev_kw.len(),
        });
    }
    run(config, EvLoad::Given(p_ev_kw)).map_err(|(e, _)| e)
}

/// Like [`run_experiment`], writing all outputs to `dir`. When a scenario
/// fails, the outputs of the scenarios that completed are still written
/// before the error is returned.
pub fn run_experiment_to(
    config: &ExperimentConfig,
    dir: &std::path::Path,
) -> Result<Experiment, PipelineError> {
    run_to(config, EvLoad::Simulated, dir)
}

pub fn run_charging_to(
    config: &ExperimentConfig,
    dir: &std::path::Path,
) -> Result<Experiment, PipelineError> {
    run_to(config, EvLoad::ChargingOnly, dir)
}

pub fn run_dispatch_to(
    config: &ExperimentConfig,
    p_ev_kw: &[f64],
    dir: &std::path::Path,
) -> Result<Experiment, PipelineError> {
    if p_ev_kw.len() != config.grid.steps() {
        return Err(PipelineError::ProfileLength {
            expected: config.grid.steps(),
            found: p_ev_kw.len(),
        });
    }
    run_to(config, EvLoad::Given(p_ev_kw), dir)
}

fn run_to(
    config: &ExperimentConfig,
    load: EvLoad<'_>,
    dir: &std::path::Path,
) -> Result<Experiment, PipelineError> {
    match run(config, load) {
        Ok(experiment) => {
            write_experiment(&experiment, dir)?;
            Ok(experiment)
        }
        Err((e, done)) => {
            for r in &done {
                write_scenario_outputs(r, dir)?;
            }
            Err(e)
        }
    }
}

/// On failure, returns the first error in scenario order together with the
/// results of all scenarios that completed.
fn run(
    config: &ExperimentConfig,
    load: EvLoad<'_>,
) -> Result<Experiment, (PipelineError, Vec<ScenarioResult>)> {
    config.validate().map_err(|e| (e.into(), Vec::new()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| (PipelineError::Pool(e.to_string()), Vec::new()))?;
    let outcomes: Vec<Result<ScenarioResult, PipelineError>> = pool.install(|| {
        (0..config.scenarios)
            .into_par_iter()
            .map(|i| run_scenario(config, load, i))
            .collect()
    });

    let mut results = Vec::with_capacity(outcomes.len());
    let mut first_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err((e, results));
    }
    let rows = results.iter().map(|r| r.row.clone()).collect();
    let timings = results.iter().map(|r| r.timings).collect();
    Ok(Experiment {
        report: Report::new(config, rows, timings),
        results,
    })
}

fn run_scenario(
    config: &ExperimentConfig,
    load: EvLoad<'_>,
    index: usize,
) -> Result<ScenarioResult, PipelineError> {
    let fail = |stage: Stage| {
        move |e: Box<dyn std::error::Error + Send + Sync>| PipelineError::Scenario {
            scenario: index,
            stage,
            source: e,
        }
    };
    let mut timings = Timings::default();
    let clock = Instant::now();
    let scenario = generate_scenario(&config.scenario_config(), config.seed, index, config.scenarios)
        .map_err(|e| fail(Stage::Generate)(e.into()))?;
    timings.generate_s = clock.elapsed().as_secs_f64();

    let (mut optimized, mut uncoordinated) = (None, None);
    if !matches!(load, EvLoad::Given(_)) {
        let clock = Instant::now();
        let wanted = |mode| config.policy.includes(mode) || (!matches!(load, EvLoad::ChargingOnly) && config.ems_profile == mode);
        if wanted(ChargingMode::Optimized) {
            let p = simulate_day(&scenario, &DayOptions::optimized(config.line_limit))
                .map_err(|e| fail(Stage::ChargingOptimized)(e.into()))?;
            optimized = Some(p);
        }
        if wanted(ChargingMode::Uncoordinated) {
            let p = simulate_day(&scenario, &DayOptions::uncoordinated())
                .map_err(|e| fail(Stage::ChargingUncoordinated)(e.into()))?;
            uncoordinated = Some(p);
        }
        timings.charging_s = clock.elapsed().as_secs_f64();
    }

    let mut row = ScenarioRow::new(&scenario);
    row.set_peaks(
        optimized.as_ref().map(|p| p.day_peak_kw),
        uncoordinated.as_ref().map(|p| p.day_peak_kw),
    );
    row.lp_solves = optimized.as_ref().map(|p| p.lp_solves);

    let p_ev: Option<&[f64]> = match load {
        EvLoad::ChargingOnly => None,
        EvLoad::Given(p) => Some(p),
        EvLoad::Simulated => match config.ems_profile {
            ChargingMode::Optimized => optimized.as_ref(),
            ChargingMode::Uncoordinated => uncoordinated.as_ref(),
        }
        .map(|p| p.aggregate_kw.as_slice()),
    };

    let mut dispatch = None;
    if let Some(p_ev) = p_ev {
        let params = config.ems_params();
        if config.case.case1() {
            let clock = Instant::now();
            let sol = solve_ems(&scenario, p_ev, &params, &config.milp_options())
                .map_err(|e| fail(Stage::DispatchCase1)(e.into()))?;
            timings.dispatch_s = clock.elapsed().as_secs_f64();
            row.case1_cost = Some(sol.cost);
            row.milp_status = Some(sol.status);
            row.milp_gap = Some(sol.gap);
            row.milp_nodes = Some(sol.nodes);
            dispatch = Some(sol);
        }
        if config.case.case2() {
            let cost = baseline_cost(&scenario, p_ev).map_err(|e| fail(Stage::DispatchCase2)(e.into()))?;
            row.case2_cost = Some(cost);
        }
        row.saving_pct = match (row.case1_cost, row.case2_cost) {
            (Some(c1), Some(c2)) => percent_saving(c1, c2),
            _ => None,
        };
    }

    Ok(ScenarioResult {
        scenario,
        optimized,
        uncoordinated,
        dispatch,
        row,
        timings,
    })
}

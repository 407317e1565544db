//! Station energy dispatch: grid exchange, storage, braking energy and solar
//! against a fixed EV load, plus the grid-only reference case.

mod model;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::solver::{MilpStatus, ModelError, SolverError};

pub use model::{build_ems_model, grid_only_start, solve_ems, EmsModel, EmsVars};

/// How discharge power enters the storage energy balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DischargeForm {
    /// Energy removed is `η_B− · P_B− · Δt`.
    #[default]
    Scaled,
    /// Energy removed is `P_B− · Δt / η_B−`.
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EssParams {
    /// Usable capacity, also the upper SoC bound, kWh.
    pub capacity: f64,
    pub soc_min: f64,
    /// Stored energy at the start of the day, kWh.
    pub soc_initial: f64,
    pub charge_max_kw: f64,
    pub discharge_max_kw: f64,
    /// Fraction of stored energy lost per step.
    pub self_discharge: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
}

impl Default for EssParams {
    fn default() -> Self {
        Self {
            capacity: 1000.0,
            soc_min: 100.0,
            soc_initial: 500.0,
            charge_max_kw: 1000.0,
            discharge_max_kw: 1000.0,
            self_discharge: 0.0,
            eta_charge: 0.95,
            eta_discharge: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmsParams {
    pub grid_buy_max_kw: f64,
    pub grid_sell_max_kw: f64,
    pub ess: EssParams,
    pub discharge_form: DischargeForm,
    /// Require the end-of-day SoC to be at least the initial SoC.
    pub terminal_soc: bool,
}

impl Default for EmsParams {
    fn default() -> Self {
        Self {
            grid_buy_max_kw: 10_000.0,
            grid_sell_max_kw: 10_000.0,
            ess: EssParams::default(),
            discharge_form: DischargeForm::Scaled,
            terminal_soc: false,
        }
    }
}

impl EmsParams {
    /// Checks parameter ranges; errors name the offending key.
    pub fn validate(&self) -> Result<(), EmsError> {
        let bad = |field: &str, reason: String| {
            Err(EmsError::InvalidParameter {
                field: field.to_string(),
                reason,
            })
        };
        let e = &self.ess;
        for (field, v) in [
            ("exchange.buy_max_kw", self.grid_buy_max_kw),
            ("exchange.sell_max_kw", self.grid_sell_max_kw),
            ("ess.charge_max_kw", e.charge_max_kw),
            ("ess.discharge_max_kw", e.discharge_max_kw),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(field, format!("must be positive and finite, got {v}"));
            }
        }
        if !(e.capacity.is_finite() && e.capacity >= 0.0) {
            return bad("ess.capacity", format!("must be non-negative, got {}", e.capacity));
        }
        if !(e.soc_min >= 0.0 && e.soc_min <= e.capacity) {
            return bad(
                "ess.soc_min",
                format!("need 0 <= soc_min <= capacity, got {} > {}", e.soc_min, e.capacity),
            );
        }
        if !(e.soc_initial >= e.soc_min && e.soc_initial <= e.capacity) {
            return bad(
                "ess.soc_initial",
                format!(
                    "need soc_min <= soc_initial <= capacity, got {} outside [{}, {}]",
                    e.soc_initial, e.soc_min, e.capacity
                ),
            );
        }
        for (field, v) in [("ess.eta_charge", e.eta_charge), ("ess.eta_discharge", e.eta_discharge)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(field, format!("must lie in (0, 1], got {v}"));
            }
        }
        if !(e.self_discharge >= 0.0 && e.self_discharge < 1.0) {
            return bad(
                "ess.self_discharge",
                format!("must lie in [0, 1), got {}", e.self_discharge),
            );
        }
        Ok(())
    }

    /// Storage energy removed per kWh of discharge power-time.
    pub fn discharge_factor(&self) -> f64 {
        match self.discharge_form {
            DischargeForm::Scaled => self.ess.eta_discharge,
            DischargeForm::Conventional => 1.0 / self.ess.eta_discharge,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EmsError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("EV profile has {found} steps, scenario has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("dispatch infeasible{}", match .step {
        Some(t) => format!(" at step {t}: net load {net_kw:.3} kW exceeds grid and storage capacity"),
        None => String::new(),
    })]
    Infeasible { step: Option<usize>, net_kw: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilityMismatch(f64),
    #[error("{0} costs for {1} probabilities")]
    CountMismatch(usize, usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<ModelError> for EmsError {
    fn from(e: ModelError) -> Self {
        Self::Solver(e.into())
    }
}

/// Optimal station dispatch for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmsSolution {
    pub p_g: Vec<f64>,
    pub p_s: Vec<f64>,
    pub p_bplus: Vec<f64>,
    pub p_bminus: Vec<f64>,
    pub p_rbe: Vec<f64>,
    /// Stored energy at the end of each step, kWh.
    pub soc_b: Vec<f64>,
    pub u_g: Vec<u8>,
    pub u_b: Vec<u8>,
    /// Daily cost, €.
    pub cost: f64,
    pub status: MilpStatus,
    pub gap: f64,
    pub nodes: usize,
}

impl EmsSolution {
    pub fn steps(&self) -> usize {
        self.p_g.len()
    }

    /// Writes `step,p_g,p_s,p_bplus,p_bminus,p_rbe,soc_b,u_g,u_b`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::from("step,p_g,p_s,p_bplus,p_bminus,p_rbe,soc_b,u_g,u_b\n");
        for t in 0..self.steps() {
            out.push_str(&format!(
                "{t},{},{},{},{},{},{},{},{}\n",
                self.p_g[t],
                self.p_s[t],
                self.p_bplus[t],
                self.p_bminus[t],
                self.p_rbe[t],
                self.soc_b[t],
                self.u_g[t],
                self.u_b[t]
            ));
        }
        std::fs::File::create(path)?.write_all(out.as_bytes())
    }
}

/// Grid-only reference cost: all train and EV load bought at the buy price.
pub fn baseline_cost(scenario: &Scenario, p_ev: &[f64]) -> Result<f64, EmsError> {
    check_profile(scenario, p_ev)?;
    let dt = scenario.grid.dt();
    Ok((0..scenario.steps())
        .map(|t| scenario.buy_price[t] * (scenario.demand_kw[t] + p_ev[t]) * dt)
        .sum())
}

/// Probability-weighted cost over scenarios.
pub fn expected_cost(costs: &[f64], probabilities: &[f64]) -> Result<f64, EmsError> {
    if costs.len() != probabilities.len() {
        return Err(EmsError::CountMismatch(costs.len(), probabilities.len()));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(EmsError::ProbabilityMismatch(total));
    }
    Ok(costs.iter().zip(probabilities).map(|(c, p)| c * p).sum())
}

fn check_profile(scenario: &Scenario, p_ev: &[f64]) -> Result<(), EmsError> {
    if p_ev.len() != scenario.steps() {
        return Err(EmsError::LengthMismatch {
            expected: scenario.steps(),
            found: p_ev.len(),
        });
    }
    Ok(())
}

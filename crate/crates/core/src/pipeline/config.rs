use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ems::{DischargeForm, EmsError, EmsParams, EssParams};
use crate::ev::{ChargingMode, LineLimit};
use crate::scenario::{
    BusConfig, CarConfig, InputFiles, PvParams, ScenarioConfig, ScenarioError, SyntheticConfig,
    TimeGrid,
};
use crate::solver::MilpOptions;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("config key `{key}`: {message}")]
    Parse { key: String, message: String },
    #[error("invalid config value `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl From<ScenarioError> for ConfigError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::InvalidParameter { field, reason } => Self::Invalid { field, reason },
            ScenarioError::InvalidClock(text) => Self::Invalid {
                field: "buses.schedule".into(),
                reason: format!("invalid clock time `{text}`, expected HH:MM"),
            },
            other => Self::Invalid {
                field: "scenario".into(),
                reason: other.to_string(),
            },
        }
    }
}

impl From<EmsError> for ConfigError {
    fn from(e: EmsError) -> Self {
        match e {
            EmsError::InvalidParameter { field, reason } => Self::Invalid { field, reason },
            other => Self::Invalid {
                field: "ems".into(),
                reason: other.to_string(),
            },
        }
    }
}

/// Which charging policies are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySelection {
    Optimized,
    Uncoordinated,
    #[default]
    Both,
}

impl PolicySelection {
    pub fn includes(self, mode: ChargingMode) -> bool {
        matches!(
            (self, mode),
            (Self::Both, _)
                | (Self::Optimized, ChargingMode::Optimized)
                | (Self::Uncoordinated, ChargingMode::Uncoordinated)
        )
    }
}

/// Which EMS cases are evaluated: 1 is the optimized dispatch with storage,
/// braking energy and PV; 2 is the grid-only reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CaseSelection {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[default]
    #[serde(rename = "both")]
    Both,
}

impl CaseSelection {
    pub fn case1(self) -> bool {
        matches!(self, Self::One | Self::Both)
    }

    pub fn case2(self) -> bool {
        matches!(self, Self::Two | Self::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExchangeLimits {
    pub buy_max_kw: f64,
    pub sell_max_kw: f64,
}

impl Default for ExchangeLimits {
    fn default() -> Self {
        let p = EmsParams::default();
        Self {
            buy_max_kw: p.grid_buy_max_kw,
            sell_max_kw: p.grid_sell_max_kw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmsOptions {
    pub discharge_form: DischargeForm,
    pub terminal_soc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverLimits {
    /// Relative MILP gap at which a dispatch counts as solved.
    pub gap: f64,
    pub node_limit: Option<usize>,
    pub time_limit_s: Option<f64>,
}

impl Default for SolverLimits {
    fn default() -> Self {
        let m = MilpOptions::default();
        Self {
            gap: m.gap_limit,
            node_limit: m.node_limit,
            time_limit_s: None,
        }
    }
}

/// Full experiment description. Every field has a default, so an empty
/// document is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenarios: usize,
    /// Scenarios processed concurrently.
    pub workers: usize,
    pub grid: TimeGrid,
    pub pv: PvParams,
    pub cars: CarConfig,
    pub buses: BusConfig,
    pub synthetic: SyntheticConfig,
    pub inputs: InputFiles,
    pub exchange: ExchangeLimits,
    pub ess: EssParams,
    pub ems: EmsOptions,
    pub line_limit: LineLimit,
    pub policy: PolicySelection,
    /// Charging profile fixed into the dispatch problems.
    pub ems_profile: ChargingMode,
    pub case: CaseSelection,
    pub solver: SolverLimits,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scenarios: 150,
            workers: 1,
            grid: TimeGrid::default(),
            pv: PvParams::default(),
            cars: CarConfig::default(),
            buses: BusConfig::default(),
            synthetic: SyntheticConfig::default(),
            inputs: InputFiles::default(),
            exchange: ExchangeLimits::default(),
            ess: EssParams::default(),
            ems: EmsOptions::default(),
            line_limit: LineLimit::unlimited(),
            policy: PolicySelection::Both,
            ems_profile: ChargingMode::Optimized,
            case: CaseSelection::Both,
            solver: SolverLimits::default(),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &str, reason: String| {
            Err(ConfigError::Invalid {
                field: field.to_string(),
                reason,
            })
        };
        if self.scenarios == 0 {
            return bad("scenarios", "at least one scenario is required".into());
        }
        if self.workers == 0 {
            return bad("workers", "at least one worker is required".into());
        }
        self.grid.validate()?;
        self.pv.validate()?;
        self.cars.validate()?;
        self.buses.validate()?;
        self.synthetic.validate()?;
        self.ems_params().validate()?;
        if let Some(p) = self.line_limit.p_max_kw {
            if !(p > 0.0 && p.is_finite()) {
                return bad("line_limit.p_max_kw", format!("must be positive, got {p}"));
            }
        }
        let s = &self.solver;
        if !(s.gap >= 0.0 && s.gap.is_finite()) {
            return bad("solver.gap", format!("must be non-negative, got {}", s.gap));
        }
        if s.node_limit == Some(0) {
            return bad("solver.node_limit", "must be positive".into());
        }
        if let Some(t) = s.time_limit_s {
            if !(t > 0.0 && t.is_finite()) {
                return bad("solver.time_limit_s", format!("must be positive, got {t}"));
            }
        }
        Ok(())
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            grid: self.grid,
            pv: self.pv,
            cars: self.cars.clone(),
            buses: self.buses.clone(),
            synthetic: self.synthetic.clone(),
            inputs: self.inputs.clone(),
        }
    }

    pub fn ems_params(&self) -> EmsParams {
        EmsParams {
            grid_buy_max_kw: self.exchange.buy_max_kw,
            grid_sell_max_kw: self.exchange.sell_max_kw,
            ess: self.ess,
            discharge_form: self.ems.discharge_form,
            terminal_soc: self.ems.terminal_soc,
        }
    }

    pub fn milp_options(&self) -> MilpOptions {
        MilpOptions {
            gap_limit: self.solver.gap,
            node_limit: self.solver.node_limit,
            time_limit: self.solver.time_limit_s.map(Duration::from_secs_f64),
            heuristic: true,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a JSON configuration. Blank input yields the
/// defaults; unknown keys are rejected with their path.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let config = if text.trim().is_empty() {
        ExperimentConfig::default()
    } else {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            key: e.path().to_string(),
            message: e.inner().to_string(),
        })?
    };
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_and_empty_object_give_defaults() {
        assert_eq!(parse_config_str("").unwrap(), ExperimentConfig::default());
        assert_eq!(parse_config_str("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn defaults_match_station_parameters() {
        let c = ExperimentConfig::default();
        assert_eq!(c.scenarios, 150);
        assert!((c.grid.dt() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(c.grid.steps(), 144);
        assert_eq!(c.cars.arrival_rate_per_hour, 4.0);
        assert_eq!((c.cars.max_demand_kwh, c.cars.nominal_kw, c.cars.max_kw), (50.0, 11.0, 22.0));
        assert_eq!((c.buses.max_demand_kwh, c.buses.nominal_kw), (300.0, 300.0));
        assert_eq!((c.pv.rated_kw, c.pv.r_c, c.pv.r_std), (1000.0, 150.0, 1000.0));
        assert_eq!((c.ess.capacity, c.ess.charge_max_kw, c.ess.eta_charge), (1000.0, 1000.0, 0.95));
        assert_eq!((c.ess.soc_initial, c.ess.soc_min), (500.0, 100.0));
    }

    #[test]
    fn override_merges_with_defaults() {
        let c = parse_config_str(r#"{"scenarios": 5, "ess": {"capacity": 2000}}"#).unwrap();
        assert_eq!(c.scenarios, 5);
        assert_eq!(c.ess.capacity, 2000.0);
        assert_eq!(c.ess.soc_min, 100.0);
        assert_eq!(c.seed, ExperimentConfig::default().seed);
    }

    #[test]
    fn errors_carry_key_paths() {
        let invalid = |text: &str| match parse_config_str(text).unwrap_err() {
            ConfigError::Invalid { field, .. } => field,
            other => panic!("{other:?}"),
        };
        let parse = |text: &str| match parse_config_str(text).unwrap_err() {
            ConfigError::Parse { key, .. } => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(invalid(r#"{"ess": {"soc_min": 1500}}"#), "ess.soc_min");
        assert_eq!(invalid(r#"{"scenarios": 0}"#), "scenarios");
        assert_eq!(invalid(r#"{"cars": {"max_kw": 5}}"#), "cars.max_kw");
        assert_eq!(invalid(r#"{"buses": {"schedule": ["25:99"]}}"#), "buses.schedule");
        assert_eq!(parse(r#"{"ess": {"capacity": "big"}}"#), "ess.capacity");
        assert_eq!(parse(r#"{"ess": {"volume": 3}}"#), "ess.volume");
        assert_eq!(parse(r#"{"colour": 3}"#), "colour");
    }

    #[test]
    fn selections_parse_from_strings() {
        let c = parse_config_str(r#"{"case": "1", "policy": "optimized", "ems_profile": "uncoordinated"}"#)
            .unwrap();
        assert_eq!(c.case, CaseSelection::One);
        assert!(c.case.case1() && !c.case.case2());
        assert!(c.policy.includes(ChargingMode::Optimized));
        assert!(!c.policy.includes(ChargingMode::Uncoordinated));
        assert_eq!(c.ems_profile, ChargingMode::Uncoordinated);
    }

    #[test]
    fn json_round_trip_is_identity() {
        let c = parse_config_str(
            r#"{"seed": 9, "line_limit": {"p_max_kw": 5123.25, "scope": "first_step"},
                "synthetic": {"rbe_noise": 0.123456789012345}, "solver": {"time_limit_s": 2.5}}"#,
        )
        .unwrap();
        let again = parse_config_str(&c.to_json()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_json(), c.to_json());
    }
}

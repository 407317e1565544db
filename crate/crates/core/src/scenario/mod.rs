//! Daily operating scenarios: time grid, exogenous series and EV sessions.

mod grid;
mod pv;
pub mod series;
mod sessions;
pub mod synthetic;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use grid::TimeGrid;
pub use pv::{pv_power_from_radiation, PvParams};
pub use series::{load_bus_schedule, load_series_csv, write_series_csv, SeriesSpec};
pub use sessions::{
    generate_bus_sessions, generate_car_sessions, parse_clock, BusConfig, CarConfig, EvSession,
    VehicleKind,
};
pub use synthetic::SyntheticConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("radiation must be non-negative, got {0}")]
    NegativeRadiation(f64),
    #[error("invalid EV session {id}: {reason}")]
    InvalidSession { id: usize, reason: String },
    #[error("invalid clock time `{0}`, expected HH:MM")]
    InvalidClock(String),
    #[error("bus schedule entry `{0}` does not fit within the day")]
    ScheduleOutsideDay(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: malformed CSV: {message}")]
    Csv { path: String, message: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path}: data row {row}: {reason}")]
    BadRow {
        path: String,
        row: usize,
        reason: String,
    },
    #[error("{path}: column `{column}` is negative at data row {row} ({value})")]
    NegativeValue {
        path: String,
        column: String,
        row: usize,
        value: f64,
    },
    #[error("{what}: expected {expected} steps, found {found}")]
    LengthMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
}

/// Exogenous per-step inputs of one day, before PV conversion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesBundle {
    pub demand_kw: Vec<f64>,
    pub rbe_kw: Vec<f64>,
    pub radiation_w_m2: Vec<f64>,
    pub buy_price: Vec<f64>,
    pub sell_price: Vec<f64>,
}

/// One day of station operation with probability weight `probability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub probability: f64,
    pub grid: TimeGrid,
    /// Train traction demand P_D, kW.
    pub demand_kw: Vec<f64>,
    /// Regenerative braking power available to storage, kW.
    pub rbe_kw: Vec<f64>,
    pub radiation_w_m2: Vec<f64>,
    pub pv_kw: Vec<f64>,
    /// Grid purchase price, €/kWh.
    pub buy_price: Vec<f64>,
    /// Grid feed-in price, €/kWh.
    pub sell_price: Vec<f64>,
    pub sessions: Vec<EvSession>,
}

impl Scenario {
    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    /// Net non-EV load P_D − P_PV at step `t`.
    pub fn net_load(&self, t: usize) -> f64 {
        self.demand_kw[t] - self.pv_kw[t]
    }
}

/// Assembles and validates a scenario, converting radiation to PV power.
pub fn build_scenario(
    id: usize,
    probability: f64,
    grid: TimeGrid,
    pv: &PvParams,
    series: SeriesBundle,
    sessions: Vec<EvSession>,
) -> Result<Scenario, ScenarioError> {
    grid.validate()?;
    pv.validate()?;
    if !(probability > 0.0 && probability <= 1.0) {
        return Err(ScenarioError::InvalidParameter {
            field: "probability".into(),
            reason: format!("must lie in (0, 1], got {probability}"),
        });
    }
    let steps = grid.steps();
    let columns: [(&str, &Vec<f64>); 5] = [
        ("demand_kw", &series.demand_kw),
        ("rbe_kw", &series.rbe_kw),
        ("radiation_w_m2", &series.radiation_w_m2),
        ("buy_price", &series.buy_price),
        ("sell_price", &series.sell_price),
    ];
    for (name, col) in columns {
        if col.len() != steps {
            return Err(ScenarioError::LengthMismatch {
                what: format!("scenario {id} series `{name}`"),
                expected: steps,
                found: col.len(),
            });
        }
        if let Some((row, &value)) = col.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(ScenarioError::NegativeValue {
                path: format!("scenario {id}"),
                column: name.into(),
                row,
                value,
            });
        }
    }
    for s in &sessions {
        s.validate()?;
    }
    let pv_kw = series
        .radiation_w_m2
        .iter()
        .map(|&b| pv_power_from_radiation(b, pv))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Scenario {
        id,
        probability,
        grid,
        demand_kw: series.demand_kw,
        rbe_kw: series.rbe_kw,
        radiation_w_m2: series.radiation_w_m2,
        pv_kw,
        buy_price: series.buy_price,
        sell_price: series.sell_price,
        sessions,
    })
}

/// Optional measured inputs; any series left unset is synthesized.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputFiles {
    /// CSV with `step,p_kw`.
    pub demand_csv: Option<PathBuf>,
    /// CSV with `step,p_kw`.
    pub rbe_csv: Option<PathBuf>,
    /// CSV with `step,w_m2`.
    pub radiation_csv: Option<PathBuf>,
    /// CSV with `step,buy_eur_kwh` and optionally `sell_eur_kwh`.
    pub prices_csv: Option<PathBuf>,
    /// CSV with a `departure_hhmm` column; replaces `buses.schedule`.
    pub bus_schedule_csv: Option<PathBuf>,
    /// Accept hourly (or other whole-multiple) resolutions.
    pub resample: bool,
}

/// Everything needed to produce the scenario set of an experiment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioConfig {
    pub grid: TimeGrid,
    pub pv: PvParams,
    pub cars: CarConfig,
    pub buses: BusConfig,
    pub synthetic: SyntheticConfig,
    pub inputs: InputFiles,
}

/// Random substreams per scenario, so scenario `i` does not depend on how
/// many draws scenario `i - 1` consumed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Cars = 0,
    Buses = 1,
    Series = 2,
}

fn rng_for(master_seed: u64, scenario: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((scenario as u64) << 4) | stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Default)]
struct MeasuredInputs {
    demand: Option<Vec<f64>>,
    rbe: Option<Vec<f64>>,
    radiation: Option<Vec<f64>>,
    buy: Option<Vec<f64>>,
    sell: Option<Vec<f64>>,
    bus_schedule: Option<Vec<String>>,
}

fn load_inputs(cfg: &ScenarioConfig) -> Result<MeasuredInputs, ScenarioError> {
    let files = &cfg.inputs;
    let grid = &cfg.grid;
    let load = |path: &Option<PathBuf>, col: &str| {
        path.as_ref()
            .map(|p| load_series_csv(p, SeriesSpec::non_negative(col).resampled(files.resample), grid))
            .transpose()
    };
    let buy = load(&files.prices_csv, "buy_eur_kwh")?;
    let sell = match &files.prices_csv {
        Some(p) => match load_series_csv(
            p,
            SeriesSpec::non_negative("sell_eur_kwh").resampled(files.resample),
            grid,
        ) {
            Ok(v) => Some(v),
            Err(ScenarioError::MissingColumn { .. }) => buy.clone(),
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(MeasuredInputs {
        demand: load(&files.demand_csv, "p_kw")?,
        rbe: load(&files.rbe_csv, "p_kw")?,
        radiation: load(&files.radiation_csv, "w_m2")?,
        buy,
        sell,
        bus_schedule: files.bus_schedule_csv.as_deref().map(load_bus_schedule).transpose()?,
    })
}

fn make_scenario(
    cfg: &ScenarioConfig,
    measured: &MeasuredInputs,
    master_seed: u64,
    index: usize,
    probability: f64,
) -> Result<Scenario, ScenarioError> {
    let grid = &cfg.grid;
    let mut rng = rng_for(master_seed, index, Stream::Series);
    let demand = match &measured.demand {
        Some(d) => d.clone(),
        None => synthetic::train_demand(&mut rng, grid, &cfg.synthetic),
    };
    let rbe = match &measured.rbe {
        Some(r) => r.clone(),
        None => synthetic::braking_power(&mut rng, &demand, &cfg.synthetic),
    };
    let radiation = match &measured.radiation {
        Some(r) => r.clone(),
        None => synthetic::radiation(&mut rng, grid, &cfg.synthetic),
    };
    let buy = match &measured.buy {
        Some(p) => p.clone(),
        None => synthetic::prices(&mut rng, grid, &cfg.synthetic),
    };
    let sell = measured.sell.clone().unwrap_or_else(|| buy.clone());

    let mut sessions =
        generate_car_sessions(&mut rng_for(master_seed, index, Stream::Cars), grid, &cfg.cars, 0)?;
    let buses = match &measured.bus_schedule {
        Some(schedule) => BusConfig {
            schedule: schedule.clone(),
            ..cfg.buses.clone()
        },
        None => cfg.buses.clone(),
    };
    let bus_sessions = generate_bus_sessions(
        &mut rng_for(master_seed, index, Stream::Buses),
        grid,
        &buses,
        sessions.len(),
    )?;
    sessions.extend(bus_sessions);

    build_scenario(
        index,
        probability,
        *grid,
        &cfg.pv,
        SeriesBundle {
            demand_kw: demand,
            rbe_kw: rbe,
            radiation_w_m2: radiation,
            buy_price: buy,
            sell_price: sell,
        },
        sessions,
    )
}

/// Generates `count` equiprobable scenarios. Identical seeds and
/// configurations give identical scenario sets.
pub fn generate_scenarios(
    cfg: &ScenarioConfig,
    master_seed: u64,
    count: usize,
) -> Result<Vec<Scenario>, ScenarioError> {
    if count == 0 {
        return Err(ScenarioError::InvalidParameter {
            field: "scenarios".into(),
            reason: "at least one scenario is required".into(),
        });
    }
    cfg.grid.validate()?;
    cfg.pv.validate()?;
    let measured = load_inputs(cfg)?;
    let probability = 1.0 / count as f64;
    (0..count)
        .map(|i| make_scenario(cfg, &measured, master_seed, i, probability))
        .collect()
}

/// Generates only scenario `index` of a set of `count`.
pub fn generate_scenario(
    cfg: &ScenarioConfig,
    master_seed: u64,
    index: usize,
    count: usize,
) -> Result<Scenario, ScenarioError> {
    cfg.grid.validate()?;
    cfg.pv.validate()?;
    let measured = load_inputs(cfg)?;
    make_scenario(cfg, &measured, master_seed, index, 1.0 / count.max(1) as f64)
}

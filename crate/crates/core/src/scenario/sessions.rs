use rand::Rng;
use rand_distr::{Distribution, Exp, Triangular, Uniform};
use serde::{Deserialize, Serialize};

use super::{ScenarioError, TimeGrid};

/// Slack used when converting a fractional step count to whole steps, so that
/// e.g. 22 kWh at 11 kW over 10-min steps yields exactly 12 steps.
const STEP_ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Car,
    Bus,
}

/// One vehicle's stay at the station. Energies are delivered energy in kWh;
/// every vehicle arrives with zero delivered energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvSession {
    pub id: usize,
    pub kind: VehicleKind,
    /// First step at which the vehicle is plugged in.
    pub arrival: usize,
    /// Step at which the vehicle has left; charging happens in `arrival..departure`.
    pub departure: usize,
    pub demand_kwh: f64,
    pub nominal_kw: f64,
    pub max_kw: f64,
    pub efficiency: f64,
}

impl EvSession {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |reason: String| ScenarioError::InvalidSession { id: self.id, reason };
        if self.arrival >= self.departure {
            return Err(bad(format!(
                "arrival step {} not before departure step {}",
                self.arrival, self.departure
            )));
        }
        if !(self.demand_kwh >= 0.0) {
            return Err(bad(format!("negative demand {}", self.demand_kwh)));
        }
        if !(self.nominal_kw > 0.0 && self.nominal_kw <= self.max_kw) {
            return Err(bad(format!(
                "need 0 < nominal ({}) <= max ({})",
                self.nominal_kw, self.max_kw
            )));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(bad(format!("efficiency {} outside (0, 1]", self.efficiency)));
        }
        Ok(())
    }

    /// Step by which charging at the nominal rate from arrival completes the
    /// demand, rounded up to a whole step.
    pub fn fulfillment_step(&self, dt: f64) -> usize {
        let steps = self.demand_kwh / (self.efficiency * self.nominal_kw * dt);
        self.arrival + (steps - STEP_ROUNDING_SLACK).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarConfig {
    /// Mean arrivals per hour during the opening window.
    pub arrival_rate_per_hour: f64,
    pub max_demand_kwh: f64,
    pub nominal_kw: f64,
    pub max_kw: f64,
    pub efficiency: f64,
    /// Departure falls within this many hours after the fulfillment time.
    pub departure_window_hours: f64,
}

impl Default for CarConfig {
    fn default() -> Self {
        Self {
            arrival_rate_per_hour: 4.0,
            max_demand_kwh: 50.0,
            nominal_kw: 11.0,
            max_kw: 22.0,
            efficiency: 1.0,
            departure_window_hours: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BusConfig {
    pub max_demand_kwh: f64,
    pub nominal_kw: f64,
    pub max_kw: f64,
    pub efficiency: f64,
    /// Arrival lead before the scheduled departure, in minutes.
    pub min_lead_minutes: f64,
    pub max_lead_minutes: f64,
    /// Scheduled departures as "HH:MM". Stand-in timetable; replace with the
    /// operator's schedule when available.
    pub schedule: Vec<String>,
}

impl Default for BusConfig {
    fn default() -> Self {
        let schedule = (13..=44)
            .map(|half_hours| format!("{:02}:{:02}", half_hours / 2, (half_hours % 2) * 30))
            .collect();
        Self {
            max_demand_kwh: 300.0,
            nominal_kw: 300.0,
            max_kw: 300.0,
            efficiency: 1.0,
            min_lead_minutes: 10.0,
            max_lead_minutes: 30.0,
            schedule,
        }
    }
}

fn check_rates(
    prefix: &str,
    max_demand_kwh: f64,
    nominal_kw: f64,
    max_kw: f64,
    efficiency: f64,
) -> Result<(), ScenarioError> {
    let bad = |field: &str, reason: String| {
        Err(ScenarioError::InvalidParameter {
            field: format!("{prefix}.{field}"),
            reason,
        })
    };
    if !(max_demand_kwh >= 0.0 && max_demand_kwh.is_finite()) {
        return bad("max_demand_kwh", format!("must be non-negative, got {max_demand_kwh}"));
    }
    if !(nominal_kw > 0.0 && nominal_kw.is_finite()) {
        return bad("nominal_kw", format!("must be positive, got {nominal_kw}"));
    }
    if !(max_kw >= nominal_kw && max_kw.is_finite()) {
        return bad("max_kw", format!("must be at least nominal_kw ({nominal_kw}), got {max_kw}"));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return bad("efficiency", format!("must lie in (0, 1], got {efficiency}"));
    }
    Ok(())
}

impl CarConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        check_rates("cars", self.max_demand_kwh, self.nominal_kw, self.max_kw, self.efficiency)?;
        for (field, v) in [
            ("arrival_rate_per_hour", self.arrival_rate_per_hour),
            ("departure_window_hours", self.departure_window_hours),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ScenarioError::InvalidParameter {
                    field: format!("cars.{field}"),
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        Ok(())
    }
}

impl BusConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        check_rates("buses", self.max_demand_kwh, self.nominal_kw, self.max_kw, self.efficiency)?;
        if !(self.min_lead_minutes >= 0.0 && self.min_lead_minutes <= self.max_lead_minutes) {
            return Err(ScenarioError::InvalidParameter {
                field: "buses.min_lead_minutes".into(),
                reason: format!(
                    "need 0 <= min_lead_minutes <= max_lead_minutes, got {} and {}",
                    self.min_lead_minutes, self.max_lead_minutes
                ),
            });
        }
        for entry in &self.schedule {
            parse_clock(entry)?;
        }
        Ok(())
    }
}

/// Parses "HH:MM" or "HHMM" into minutes after midnight.
pub fn parse_clock(text: &str) -> Result<u32, ScenarioError> {
    let t = text.trim();
    let bad = || ScenarioError::InvalidClock(t.to_string());
    let (h, m) = match t.split_once(':') {
        Some((h, m)) => (h, m),
        None if t.len() == 4 && t.bytes().all(|b| b.is_ascii_digit()) => t.split_at(2),
        None => return Err(bad()),
    };
    let h: u32 = h.parse().map_err(|_| bad())?;
    let m: u32 = m.parse().map_err(|_| bad())?;
    if m >= 60 {
        return Err(bad());
    }
    Ok(h * 60 + m)
}

fn triangular(min: f64, max: f64) -> Option<Triangular<f64>> {
    if max > min {
        Triangular::new(min, max, 0.5 * (min + max)).ok()
    } else {
        None
    }
}

/// Park-and-ride cars: Poisson arrivals over the opening window, uniform
/// energy demand, departure within a window after the fulfillment time.
pub fn generate_car_sessions<R: Rng + ?Sized>(
    rng: &mut R,
    grid: &TimeGrid,
    cfg: &CarConfig,
    first_id: usize,
) -> Result<Vec<EvSession>, ScenarioError> {
    let mut out = Vec::new();
    if cfg.arrival_rate_per_hour <= 0.0 {
        return Ok(out);
    }
    let gap = Exp::new(cfg.arrival_rate_per_hour).map_err(|e| ScenarioError::InvalidParameter {
        field: "cars.arrival_rate_per_hour".into(),
        reason: e.to_string(),
    })?;
    let energy = Uniform::new_inclusive(0.0, cfg.max_demand_kwh.max(0.0)).map_err(|e| {
        ScenarioError::InvalidParameter {
            field: "cars.max_demand_kwh".into(),
            reason: e.to_string(),
        }
    })?;
    let stay = triangular(0.0, cfg.departure_window_hours);
    let dt = grid.dt();
    let mut clock = grid.open_hour;
    loop {
        clock += gap.sample(rng);
        if clock >= grid.close_hour {
            break;
        }
        let arrival = grid.step_at(clock).clamp(grid.open_step(), grid.close_step() - 1);
        let mut session = EvSession {
            id: first_id + out.len(),
            kind: VehicleKind::Car,
            arrival,
            departure: arrival + 1,
            demand_kwh: energy.sample(rng),
            nominal_kw: cfg.nominal_kw,
            max_kw: cfg.max_kw,
            efficiency: cfg.efficiency,
        };
        let extra = stay.as_ref().map_or(0.0, |d| d.sample(rng));
        let leave_hours = grid.hours_at(session.fulfillment_step(dt)) + extra;
        session.departure = grid.step_at(leave_hours).max(arrival + 1);
        session.validate()?;
        out.push(session);
    }
    Ok(out)
}

/// Electric buses: one session per scheduled departure, arriving a triangular
/// lead time before it.
pub fn generate_bus_sessions<R: Rng + ?Sized>(
    rng: &mut R,
    grid: &TimeGrid,
    cfg: &BusConfig,
    first_id: usize,
) -> Result<Vec<EvSession>, ScenarioError> {
    let energy = Uniform::new_inclusive(0.0, cfg.max_demand_kwh.max(0.0)).map_err(|e| {
        ScenarioError::InvalidParameter {
            field: "buses.max_demand_kwh".into(),
            reason: e.to_string(),
        }
    })?;
    let lead = triangular(cfg.min_lead_minutes, cfg.max_lead_minutes);
    let mut out = Vec::with_capacity(cfg.schedule.len());
    for entry in &cfg.schedule {
        let depart_min = f64::from(parse_clock(entry)?);
        let lead_min = lead.as_ref().map_or(cfg.min_lead_minutes, |d| d.sample(rng));
        let arrive_min = depart_min - lead_min;
        if arrive_min < 0.0 || depart_min > 24.0 * 60.0 {
            return Err(ScenarioError::ScheduleOutsideDay(entry.clone()));
        }
        let departure = grid.step_at(depart_min / 60.0);
        let arrival = grid.step_at(arrive_min / 60.0).min(departure.saturating_sub(1));
        let session = EvSession {
            id: first_id + out.len(),
            kind: VehicleKind::Bus,
            arrival,
            departure,
            demand_kwh: energy.sample(rng),
            nominal_kw: cfg.nominal_kw,
            max_kw: cfg.max_kw,
            efficiency: cfg.efficiency,
        };
        session.validate()?;
        out.push(session);
    }
    Ok(out)
}

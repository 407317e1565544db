//! Synthetic stand-ins for measured station data. Every series here is
//! labelled synthetic in outputs; real data enters through the CSV loaders.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ScenarioError, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    /// Peak of the double-peak train demand profile, kW.
    pub demand_peak_kw: f64,
    /// Per-day demand scale is drawn from `[1 - spread, 1]`.
    pub demand_day_spread: f64,
    /// Multiplicative per-step demand noise amplitude.
    pub demand_noise: f64,
    /// Available braking power as a fraction of (shifted) demand.
    pub rbe_fraction: f64,
    pub rbe_shift_steps: usize,
    pub rbe_noise: f64,
    /// Clear-sky noon radiation is drawn from this range, W/m².
    pub radiation_peak_w_m2: [f64; 2],
    /// Day length (sunrise to sunset) is drawn from this range, hours.
    pub day_length_hours: [f64; 2],
    /// Cloud attenuation per step is drawn from `[0, c]` with `c` drawn per day
    /// from `[0, cloudiness_max]`.
    pub cloudiness_max: f64,
    /// Off-peak price, €/kWh.
    pub price_base_eur_kwh: f64,
    pub price_morning_peak: f64,
    pub price_evening_peak: f64,
    /// Per-day price level is drawn from `[1 - spread, 1 + spread]`.
    pub price_day_spread: f64,
    /// Hourly (day-ahead block) price noise amplitude.
    pub price_hour_noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            demand_peak_kw: 5000.0,
            demand_day_spread: 0.15,
            demand_noise: 0.05,
            rbe_fraction: 0.3,
            rbe_shift_steps: 1,
            rbe_noise: 0.2,
            radiation_peak_w_m2: [350.0, 1100.0],
            day_length_hours: [9.0, 15.5],
            cloudiness_max: 0.6,
            price_base_eur_kwh: 0.07,
            price_morning_peak: 0.6,
            price_evening_peak: 0.9,
            price_day_spread: 0.25,
            price_hour_noise: 0.1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |field: &str, reason: String| {
            Err(ScenarioError::InvalidParameter {
                field: format!("synthetic.{field}"),
                reason,
            })
        };
        for (field, v) in [
            ("demand_peak_kw", self.demand_peak_kw),
            ("demand_noise", self.demand_noise),
            ("rbe_fraction", self.rbe_fraction),
            ("rbe_noise", self.rbe_noise),
            ("price_base_eur_kwh", self.price_base_eur_kwh),
            ("price_morning_peak", self.price_morning_peak),
            ("price_evening_peak", self.price_evening_peak),
            ("price_hour_noise", self.price_hour_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(field, format!("must be non-negative, got {v}"));
            }
        }
        for (field, v) in [
            ("demand_day_spread", self.demand_day_spread),
            ("cloudiness_max", self.cloudiness_max),
            ("price_day_spread", self.price_day_spread),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(field, format!("must lie in [0, 1], got {v}"));
            }
        }
        for (field, [lo, hi]) in [
            ("radiation_peak_w_m2", self.radiation_peak_w_m2),
            ("day_length_hours", self.day_length_hours),
        ] {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return bad(field, format!("need 0 <= low <= high, got [{lo}, {hi}]"));
            }
        }
        if self.day_length_hours[1] > 24.0 {
            return bad("day_length_hours", "day length cannot exceed 24 h".into());
        }
        Ok(())
    }
}

fn bump(h: f64, center: f64, width: f64) -> f64 {
    (-(h - center).powi(2) / (2.0 * width * width)).exp()
}

fn mid(grid: &TimeGrid, t: usize) -> f64 {
    grid.hours_at(t) + 0.5 * grid.dt()
}

fn demand_shape(h: f64) -> f64 {
    // light night service, morning and evening commuter peaks
    let service = if (5.0..24.0).contains(&h) { 1.0 } else { 0.0 };
    0.12 + 0.28 * service + 0.6 * bump(h, 7.5, 1.2) + 0.5 * bump(h, 17.5, 1.5)
}

pub fn train_demand<R: Rng + ?Sized>(rng: &mut R, grid: &TimeGrid, cfg: &SyntheticConfig) -> Vec<f64> {
    let peak_shape = (0..24 * 60)
        .map(|m| demand_shape(f64::from(m) / 60.0))
        .fold(0.0, f64::max);
    let day = 1.0 - cfg.demand_day_spread * rng.random::<f64>();
    (0..grid.steps())
        .map(|t| {
            let noise = 1.0 + cfg.demand_noise * (2.0 * rng.random::<f64>() - 1.0);
            (cfg.demand_peak_kw * day * demand_shape(mid(grid, t)) / peak_shape * noise).max(0.0)
        })
        .collect()
}

/// Braking power available to storage: a scaled, delayed copy of demand.
pub fn braking_power<R: Rng + ?Sized>(
    rng: &mut R,
    demand: &[f64],
    cfg: &SyntheticConfig,
) -> Vec<f64> {
    (0..demand.len())
        .map(|t| {
            let src = demand[t.saturating_sub(cfg.rbe_shift_steps)];
            let noise = 1.0 + cfg.rbe_noise * (2.0 * rng.random::<f64>() - 1.0);
            (cfg.rbe_fraction * src * noise).max(0.0)
        })
        .collect()
}

/// Clear-sky half-sine between sunrise and sunset with random cloud cover.
pub fn radiation<R: Rng + ?Sized>(rng: &mut R, grid: &TimeGrid, cfg: &SyntheticConfig) -> Vec<f64> {
    let [lo, hi] = cfg.radiation_peak_w_m2;
    let peak = lo + (hi - lo) * rng.random::<f64>();
    let [dl, dh] = cfg.day_length_hours;
    let length = dl + (dh - dl) * rng.random::<f64>();
    let cloud = cfg.cloudiness_max * rng.random::<f64>();
    let sunrise = 12.5 - 0.5 * length;
    (0..grid.steps())
        .map(|t| {
            let h = mid(grid, t);
            let attenuation = 1.0 - cloud * rng.random::<f64>();
            let phase = (h - sunrise) / length;
            if (0.0..1.0).contains(&phase) {
                (peak * (std::f64::consts::PI * phase).sin() * attenuation).max(0.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Day-ahead style prices: constant within each hour, two daily peaks.
pub fn prices<R: Rng + ?Sized>(rng: &mut R, grid: &TimeGrid, cfg: &SyntheticConfig) -> Vec<f64> {
    let level = 1.0 + cfg.price_day_spread * (2.0 * rng.random::<f64>() - 1.0);
    let hourly: Vec<f64> = (0..24)
        .map(|h| {
            let h = f64::from(h) + 0.5;
            let noise = 1.0 + cfg.price_hour_noise * (2.0 * rng.random::<f64>() - 1.0);
            let shape =
                1.0 + cfg.price_morning_peak * bump(h, 8.0, 1.5) + cfg.price_evening_peak * bump(h, 19.0, 2.0);
            (cfg.price_base_eur_kwh * level * shape * noise).max(0.0)
        })
        .collect();
    (0..grid.steps())
        .map(|t| hourly[((grid.hours_at(t) + 1e-9) as usize).min(23)])
        .collect()
}

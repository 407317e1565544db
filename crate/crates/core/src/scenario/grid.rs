use serde::{Deserialize, Serialize};

use super::ScenarioError;

/// Uniform day discretization and the window in which chargers accept arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeGrid {
    pub step_minutes: u32,
    pub steps_per_day: usize,
    /// Opening hour of the charging facility (inclusive).
    pub open_hour: f64,
    /// Closing hour for arrivals (exclusive).
    pub close_hour: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            step_minutes: 10,
            steps_per_day: 144,
            open_hour: 6.0,
            close_hour: 22.0,
        }
    }
}

impl TimeGrid {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |field: &str, reason: String| ScenarioError::InvalidParameter {
            field: format!("grid.{field}"),
            reason,
        };
        if self.step_minutes == 0 {
            return Err(invalid("step_minutes", "must be positive".into()));
        }
        if self.steps_per_day * self.step_minutes as usize != 24 * 60 {
            return Err(invalid(
                "steps_per_day",
                format!(
                    "{} steps of {} min do not cover 24 h",
                    self.steps_per_day, self.step_minutes
                ),
            ));
        }
        if !(0.0..=24.0).contains(&self.open_hour)
            || !(0.0..=24.0).contains(&self.close_hour)
            || self.open_hour >= self.close_hour
        {
            return Err(invalid(
                "open_hour",
                format!(
                    "opening window [{}, {}) must lie within the day",
                    self.open_hour, self.close_hour
                ),
            ));
        }
        Ok(())
    }

    /// Step length Δt in hours.
    pub fn dt(&self) -> f64 {
        f64::from(self.step_minutes) / 60.0
    }

    pub fn steps(&self) -> usize {
        self.steps_per_day
    }

    /// Step containing clock time `hours` (may exceed the day).
    pub fn step_at(&self, hours: f64) -> usize {
        (hours * 60.0 / f64::from(self.step_minutes) + 1e-9).floor().max(0.0) as usize
    }

    pub fn hours_at(&self, step: usize) -> f64 {
        step as f64 * self.dt()
    }

    pub fn open_step(&self) -> usize {
        self.step_at(self.open_hour)
    }

    pub fn close_step(&self) -> usize {
        self.step_at(self.close_hour)
    }

    pub fn in_opening_window(&self, step: usize) -> bool {
        (self.open_step()..self.close_step()).contains(&step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_ten_minutes() {
        let g = TimeGrid::default();
        g.validate().unwrap();
        assert!((g.dt() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(g.open_step(), 36);
        assert_eq!(g.close_step(), 132);
        assert!(g.in_opening_window(131));
        assert!(!g.in_opening_window(132));
    }

    #[test]
    fn rejects_incomplete_day() {
        let g = TimeGrid {
            steps_per_day: 100,
            ..TimeGrid::default()
        };
        assert!(g.validate().is_err());
        let g = TimeGrid {
            open_hour: 23.0,
            close_hour: 6.0,
            ..TimeGrid::default()
        };
        assert!(g.validate().is_err());
    }
}

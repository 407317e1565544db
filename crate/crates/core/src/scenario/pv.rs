use serde::{Deserialize, Serialize};

use super::ScenarioError;

/// Radiation-to-power model of the station's solar plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvParams {
    /// Installed capacity P_r in kW.
    pub rated_kw: f64,
    /// Radiation (W/m²) below which output grows quadratically.
    pub r_c: f64,
    /// Standard-condition radiation (W/m²) at which output saturates.
    pub r_std: f64,
}

impl Default for PvParams {
    fn default() -> Self {
        Self {
            rated_kw: 1000.0,
            r_c: 150.0,
            r_std: 1000.0,
        }
    }
}

impl PvParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.rated_kw >= 0.0) {
            return Err(ScenarioError::InvalidParameter {
                field: "pv.rated_kw".into(),
                reason: format!("must be non-negative, got {}", self.rated_kw),
            });
        }
        if !(self.r_c > 0.0 && self.r_c < self.r_std) {
            return Err(ScenarioError::InvalidParameter {
                field: "pv.r_c".into(),
                reason: format!("need 0 < r_c < r_std, got r_c={} r_std={}", self.r_c, self.r_std),
            });
        }
        Ok(())
    }
}

/// Solar output (kW) for radiation `beta` (W/m²): quadratic below `r_c`,
/// linear up to `r_std`, flat at the rated power beyond.
pub fn pv_power_from_radiation(beta: f64, params: &PvParams) -> Result<f64, ScenarioError> {
    if !(beta >= 0.0) {
        return Err(ScenarioError::NegativeRadiation(beta));
    }
    let PvParams { rated_kw, r_c, r_std } = *params;
    Ok(if beta < r_c {
        beta * beta * rated_kw / (r_c * r_std)
    } else if beta < r_std {
        beta * rated_kw / r_std
    } else {
        rated_kw
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_values() {
        let p = PvParams::default();
        assert_eq!(pv_power_from_radiation(0.0, &p).unwrap(), 0.0);
        assert!((pv_power_from_radiation(100.0, &p).unwrap() - 200.0 / 3.0).abs() < 1e-9);
        assert!((pv_power_from_radiation(500.0, &p).unwrap() - 500.0).abs() < 1e-9);
        assert_eq!(pv_power_from_radiation(1200.0, &p).unwrap(), 1000.0);
    }

    #[test]
    fn negative_radiation_is_rejected() {
        let err = pv_power_from_radiation(-1.0, &PvParams::default()).unwrap_err();
        assert!(matches!(err, ScenarioError::NegativeRadiation(_)));
    }

    #[test]
    fn invalid_thresholds() {
        let p = PvParams {
            r_c: 1200.0,
            ..PvParams::default()
        };
        assert!(p.validate().is_err());
    }
}

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Boundary, CostFunction, DirectionDensity, ModelParams, Potential, RoutingRule};
use crate::error::{DtnError, Result};

/// Cost entry of a JSON configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Quadratic,
    Power { exponent: f64 },
    Radial { max_radius: f64, values: Vec<f64> },
}

/// Potential entry of a JSON configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    NegAbsTheta,
    ExpProgress { kappa: f64 },
}

/// Flat, serializable parameter set. Missing keys take their default values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub lambda: f64,
    pub v0: f64,
    pub r0: f64,
    pub theta_w: f64,
    pub a: f64,
    pub eccentricity: f64,
    pub cost: CostSpec,
    pub potential: PotentialSpec,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lambda: 1.0,
            v0: 1.0,
            r0: 1.0,
            theta_w: FRAC_PI_2,
            a: 1.0,
            eccentricity: 0.7,
            cost: CostSpec::Quadratic,
            potential: PotentialSpec::NegAbsTheta,
        }
    }
}

/// Keys accepted in configuration files and sweep axes.
pub const CONFIG_KEYS: [&str; 8] = [
    "lambda",
    "v0",
    "r0",
    "theta_w",
    "a",
    "eccentricity",
    "cost",
    "potential",
];

impl ModelConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| DtnError::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Set a numeric key by name; used by sweeps.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "lambda" => self.lambda = value,
            "v0" => self.v0 = value,
            "r0" => self.r0 = value,
            "theta_w" => self.theta_w = value,
            "a" => self.a = value,
            "eccentricity" => self.eccentricity = value,
            "kappa" => self.potential = PotentialSpec::ExpProgress { kappa: value },
            other => return Err(DtnError::Config(format!("`{other}` is not a numeric sweep parameter"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        match key {
            "lambda" => Some(self.lambda),
            "v0" => Some(self.v0),
            "r0" => Some(self.r0),
            "theta_w" => Some(self.theta_w),
            "a" => Some(self.a),
            "eccentricity" => Some(self.eccentricity),
            "kappa" => match self.potential {
                PotentialSpec::ExpProgress { kappa } => Some(kappa),
                PotentialSpec::NegAbsTheta => None,
            },
            _ => None,
        }
    }

    /// Build and validate the model.
    pub fn to_params(&self) -> Result<ModelParams> {
        let direction_density = if (self.theta_w - FRAC_PI_2).abs() < 1e-15 {
            DirectionDensity::uniform()
        } else {
            DirectionDensity::four_window(self.theta_w)?
        };
        let cost = match &self.cost {
            CostSpec::Quadratic => CostFunction::Quadratic,
            CostSpec::Power { exponent } => CostFunction::power(*exponent)?,
            CostSpec::Radial { max_radius, values } => CostFunction::radial(*max_radius, values.clone())?,
        };
        let potential = match self.potential {
            PotentialSpec::NegAbsTheta => Potential::NegAbsTheta,
            PotentialSpec::ExpProgress { kappa } => {
                if !kappa.is_finite() || kappa < 0.0 {
                    return Err(DtnError::invalid("potential", "kappa must be finite and >= 0"));
                }
                Potential::ExpProgress { kappa }
            }
        };
        let boundary = Boundary::ellipse(self.a, self.eccentricity)?;
        let params = ModelParams {
            lambda: self.lambda,
            v0: self.v0,
            r0: self.r0,
            direction_density,
            cost,
            rule: RoutingRule::new(boundary, potential),
        };
        params.validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        let c = ModelConfig::from_json_str("{}").unwrap();
        assert_eq!(c, ModelConfig::default());
        let p = c.to_params().unwrap();
        assert_eq!(p.lambda, 1.0);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ModelConfig::from_json_str(r#"{"lambda": 2, "speed": 3}"#).unwrap_err();
        assert!(err.to_string().contains("speed"));
    }

    #[test]
    fn tagged_entries() {
        let c = ModelConfig::from_json_str(
            r#"{"cost": {"power": {"exponent": 3}}, "potential": {"exp_progress": {"kappa": 0.5}}}"#,
        )
        .unwrap();
        assert_eq!(c.cost, CostSpec::Power { exponent: 3.0 });
        assert_eq!(c.potential, PotentialSpec::ExpProgress { kappa: 0.5 });
        let c2 = ModelConfig::from_json_str(r#"{"cost": "quadratic", "potential": "neg_abs_theta"}"#).unwrap();
        assert_eq!(c2, ModelConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = ModelConfig::default();
        c.set("lambda", 2.5).unwrap();
        let back = ModelConfig::from_json_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn negative_lambda_names_key() {
        let c = ModelConfig {
            lambda: -1.0,
            ..Default::default()
        };
        assert!(c.to_params().unwrap_err().to_string().contains("lambda"));
    }
}

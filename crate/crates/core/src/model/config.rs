use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dist::ServiceDistribution;
use super::rate::{RateFunction, RateSpec};
use crate::error::{config, Result};

/// `[initial]` section: initial occupancy and the residual-time law of the
/// customers present at time zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub fraction: f64,
    /// Defaults to the service distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<ServiceDistribution>,
}

/// `[system]` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub horizon: f64,
    #[serde(default = "default_capacity")]
    pub capacity: f64,
    #[serde(default)]
    pub buffer_ratio: f64,
}

fn default_capacity() -> f64 {
    1.0
}

/// On-disk layout of a system configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub rate: RateSpec,
    pub service: ServiceDistribution,
    #[serde(default)]
    pub initial: InitialSection,
    pub system: SystemSection,
}

/// Validated system primitives in fluid scale.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    pub rate: RateFunction,
    pub service: ServiceDistribution,
    pub initial_fraction: f64,
    pub initial_dist: ServiceDistribution,
    pub capacity: f64,
    pub buffer_ratio: f64,
}

impl SystemConfig {
    pub fn from_file_model(file: ConfigFile) -> Result<Self> {
        let ConfigFile {
            rate,
            service,
            initial,
            system,
        } = file;
        let rate = RateFunction::new(rate, system.horizon)?;
        let initial_dist = initial.distribution.unwrap_or_else(|| service.clone());
        let cfg = SystemConfig {
            rate,
            service,
            initial_fraction: initial.fraction,
            initial_dist,
            capacity: system.capacity,
            buffer_ratio: system.buffer_ratio,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_file_model(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let (c, beta, r0) = (self.capacity, self.buffer_ratio, self.initial_fraction);
        if !(c.is_finite() && c > 0.0) {
            return config(format!("capacity must be positive, got {c}"));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return config(format!("buffer_ratio must be nonnegative, got {beta}"));
        }
        if !(r0.is_finite() && r0 >= 0.0) {
            return config(format!("initial fraction must be nonnegative, got {r0}"));
        }
        if r0 > c + beta {
            return config(format!(
                "initial fraction {r0} exceeds capacity plus buffer {}",
                c + beta
            ));
        }
        self.service.validate()?;
        self.initial_dist.validate()
    }

    pub fn horizon(&self) -> f64 {
        self.rate.horizon()
    }

    /// Copy with different capacity thresholds.
    pub fn with_thresholds(&self, capacity: f64, buffer_ratio: f64) -> Self {
        SystemConfig {
            capacity,
            buffer_ratio,
            ..self.clone()
        }
    }

    /// The fully resolved config (computed rate bound, explicit initial
    /// distribution) in file form.
    pub fn to_file_model(&self) -> ConfigFile {
        ConfigFile {
            rate: self.rate.spec(),
            service: self.service.clone(),
            initial: InitialSection {
                fraction: self.initial_fraction,
                distribution: Some(self.initial_dist.clone()),
            },
            system: SystemSection {
                horizon: self.horizon(),
                capacity: self.capacity,
                buffer_ratio: self.buffer_ratio,
            },
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file_model()).expect("config serializes")
    }

    /// Fails unless both distributions have bounded densities.
    pub(crate) fn require_bounded_densities(&self) -> Result<()> {
        if !self.service.has_bounded_density() || !self.initial_dist.has_bounded_density() {
            return config(
                "the fluid solvers need service and initial distributions with bounded densities",
            );
        }
        Ok(())
    }
}

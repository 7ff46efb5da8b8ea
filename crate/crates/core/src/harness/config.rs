use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::estimator::{DimensionSchedule, EpochMode, EstimatorConfig};
use crate::lti::{PlantModel, Polynomial};
use crate::noise::{Logistic, NoiseFamily, NoiseModel, RadiusSchedule};
use crate::reference::{read_column, ReferenceSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    /// `1, a_1, .., a_p`.
    pub a: Vec<f64>,
    /// `b_1, .., b_q`.
    pub b: Vec<f64>,
}

impl PlantConfig {
    pub fn polynomials(&self) -> Result<(Polynomial, Polynomial)> {
        Ok((Polynomial::new(self.a.clone())?, Polynomial::new(self.b.clone())?))
    }

    pub fn build(&self) -> Result<PlantModel> {
        let (a, b) = self.polynomials()?;
        PlantModel::new(a, b)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Logistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub family: NoiseKind,
    /// Standard deviation (Gaussian) or scale (logistic).
    pub sigma: f64,
    #[serde(default)]
    pub threshold_bound: f64,
}

impl NoiseConfig {
    pub fn build(&self) -> Result<NoiseModel> {
        match self.family {
            NoiseKind::Gaussian => NoiseModel::gaussian(self.sigma, self.threshold_bound),
            NoiseKind::Logistic => NoiseModel::new(
                NoiseFamily::Unimodal(Arc::new(Logistic::new(self.sigma)?)),
                self.threshold_bound,
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ThresholdSpec {
    Constant { value: f64 },
    /// `c_0, c_1, ..`; must cover the horizon.
    Sequence { values: Vec<f64> },
    File { path: PathBuf },
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec::Constant { value: 0.0 }
    }
}

impl ThresholdSpec {
    pub fn resolve(&self, horizon: usize) -> Result<Vec<f64>> {
        let values = match self {
            ThresholdSpec::Constant { value } => return Ok(vec![*value; horizon]),
            ThresholdSpec::Sequence { values } => values.clone(),
            ThresholdSpec::File { path } => read_column(path)?,
        };
        if values.len() < horizon {
            return Err(Error::Config(format!(
                "threshold sequence has {} entries, horizon is {horizon}",
                values.len()
            )));
        }
        Ok(values[..horizon].to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSettings {
    #[serde(default = "default_a")]
    pub a_exponent: f64,
    #[serde(default = "default_alpha")]
    pub alpha_exponent: f64,
    #[serde(default)]
    pub epoch_mode: EpochMode,
    #[serde(default = "default_p0", rename = "P0_scale", alias = "p0_scale")]
    pub p0_scale: f64,
}

fn default_a() -> f64 {
    2.0
}

fn default_alpha() -> f64 {
    0.125
}

fn default_p0() -> f64 {
    1.0
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            a_exponent: default_a(),
            alpha_exponent: default_alpha(),
            epoch_mode: EpochMode::Replay,
            p0_scale: default_p0(),
        }
    }
}

impl From<EstimatorSettings> for EstimatorConfig {
    fn from(s: EstimatorSettings) -> Self {
        EstimatorConfig {
            a_exponent: s.a_exponent,
            alpha_exponent: s.alpha_exponent,
            epoch_mode: s.epoch_mode,
            p0_scale: s.p0_scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub thresholds: ThresholdSpec,
    pub reference: ReferenceSpec,
    pub horizon: usize,
    #[serde(default)]
    pub estimator: EstimatorSettings,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the master seed for the dither stream only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dither_seed: Option<u64>,
    /// Put the noise inside the plant equation instead of the sensor.
    #[serde(default)]
    pub process_noise: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// `A = 1 - 0.1z + 0.5z^2`, `B = 1 + 0.5z - 0.4z^2`, standard normal
    /// sensor noise, logistic reference with parameter `r`, constant
    /// threshold `c` (with `C = |c|`).
    pub fn benchmark(r: f64, c: f64, horizon: usize) -> Self {
        Self {
            plant: PlantConfig {
                a: vec![1.0, -0.1, 0.5],
                b: vec![1.0, 0.5, -0.4],
            },
            noise: NoiseConfig {
                family: NoiseKind::Gaussian,
                sigma: 1.0,
                threshold_bound: c.abs(),
            },
            thresholds: ThresholdSpec::Constant { value: c },
            reference: ReferenceSpec::logistic(r),
            horizon,
            estimator: EstimatorSettings::default(),
            controller: ControllerConfig::default(),
            seed: 0,
            dither_seed: None,
            process_noise: false,
            output: None,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        self.plant.build()?;
        let noise = self.noise.build()?;
        DimensionSchedule::new(self.estimator.a_exponent)?;
        RadiusSchedule::new(self.estimator.alpha_exponent)?;
        if !(self.estimator.p0_scale > 0.0 && self.estimator.p0_scale.is_finite()) {
            return Err(Error::Config("estimator.P0_scale must be positive".into()));
        }
        self.controller.validate()?;
        self.reference.validate()?;
        if let ThresholdSpec::Constant { value } = &self.thresholds {
            check_threshold(*value, noise.threshold_bound(), 0)?;
        } else {
            for (k, c) in self.thresholds.resolve(self.horizon)?.iter().enumerate() {
                check_threshold(*c, noise.threshold_bound(), k)?;
            }
        }
        Ok(())
    }
}

fn check_threshold(c: f64, bound: f64, k: usize) -> Result<()> {
    if !c.is_finite() || c.abs() > bound {
        return Err(Error::Config(format!(
            "threshold c_{k} = {c} exceeds noise.threshold_bound = {bound}"
        )));
    }
    Ok(())
}

//! Experiment files: one TOML document describes one experiment.

use std::path::Path;

use esdelay::bounds::{region_for_local_map, BoundInputs, DelayRegime};
use esdelay::dither::{DitherConfig, GainSchedule};
use esdelay::estimator::{default_decimation, EsParams, EsRunConfig, EXAMPLE_THETA0};
use esdelay::feasibility::SearchConfig;
use esdelay::{DelayKind, DelayModel, QuadraticMap, UncertaintyBounds, Variant};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub map: MapSpec,
    pub uncertainty: UncertaintyBounds,
    pub delay: DelaySpec,
    pub dither: DitherSpec,
    pub gains: GainsSpec,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub theta_star: Vec<f64>,
    pub q_star: f64,
    /// Row-major.
    pub hessian: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayVariant {
    Zero,
    Constant,
    UniformRandom,
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub variant: DelayVariant,
    pub d_max: usize,
    /// Delay RNG seed; falls back to `run.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Constant delay value; defaults to `d_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DitherSpec {
    pub amplitudes: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    pub k: f64,
    pub lambda: f64,
    pub omega_h: f64,
    pub alpha0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub variant: Variant,
    pub horizon: u64,
    pub theta0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimation: Option<u64>,
}

/// Where the certificate is evaluated. `sigma1` (radius of the region
/// where the map is quadratic) replaces `sigma` by `σ₁ − α₀|a|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<f64>,
    /// Defaults to `dither.epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_star: Option<f64>,
}

fn cfg_err(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl RunSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let spec: RunSpec = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run spec serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.map()?;
        self.uncertainty.validate().map_err(|e| cfg_err("uncertainty", e))?;
        // the seed may still come from --seed-override; it is enforced when the run is built
        self.delay_model(Some(0))?;
        let n = self.map.theta_star.len();
        if self.dither.amplitudes.len() != n {
            return Err(cfg_err("dither.amplitudes", format!("expected {n} entries, got {}", self.dither.amplitudes.len())));
        }
        DitherConfig::new(self.dither.amplitudes.clone(), self.dither.epsilon, self.delay.d_max).map_err(|e| cfg_err("dither", e))?;
        for (name, v) in [("k", self.gains.k), ("lambda", self.gains.lambda), ("omega_h", self.gains.omega_h), ("alpha0", self.gains.alpha0)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(cfg_err(&format!("gains.{name}"), "must be finite and nonnegative"));
            }
        }
        if self.run.theta0.len() != n {
            return Err(cfg_err("run.theta0", format!("expected {n} entries, got {}", self.run.theta0.len())));
        }
        if self.run.decimation == Some(0) {
            return Err(cfg_err("run.decimation", "must be at least 1"));
        }
        if let Some(b) = &self.bounds {
            if b.sigma.is_some() && b.sigma1.is_some() {
                return Err(cfg_err("bounds", "give either sigma or sigma1, not both"));
            }
            if let Some(e) = b.epsilon_star {
                if !(e > 0.0 && e.is_finite()) {
                    return Err(cfg_err("bounds.epsilon_star", "must be positive"));
                }
            }
        }
        if let Some(s) = &self.search {
            s.validate().map_err(|e| cfg_err("search", e))?;
        }
        Ok(())
    }

    pub fn map(&self) -> Result<QuadraticMap, CliError> {
        QuadraticMap::from_rows(self.map.theta_star.clone(), self.map.q_star, &self.map.hessian).map_err(|e| {
            let field = match e {
                esdelay::plant::PlantError::NonFinite("theta_star/q_star") | esdelay::plant::PlantError::Dimension { .. } => "map.theta_star",
                _ => "map.hessian",
            };
            cfg_err(field, e)
        })
    }

    /// The delay model; stochastic delays need a seed from the override,
    /// `delay.seed` or `run.seed`.
    pub fn delay_model(&self, seed_override: Option<u64>) -> Result<DelayModel, CliError> {
        let d = &self.delay;
        let kind = match d.variant {
            DelayVariant::Zero => DelayKind::Zero,
            DelayVariant::Constant => DelayKind::Constant { d: d.d.unwrap_or(d.d_max) },
            DelayVariant::UniformRandom => {
                let seed = seed_override.or(d.seed).or(self.run.seed).ok_or_else(|| cfg_err("delay.seed", "uniform_random delays require a seed"))?;
                DelayKind::UniformRandom { seed }
            }
            DelayVariant::Sequence => {
                let values = d.values.clone().ok_or_else(|| cfg_err("delay.values", "sequence delays require values"))?;
                DelayKind::Sequence { values }
            }
        };
        DelayModel::new(kind, d.d_max).map_err(|e| cfg_err("delay", e))
    }

    pub fn run_config(&self, seed_override: Option<u64>) -> Result<EsRunConfig, CliError> {
        let map = self.map()?;
        let delay = self.delay_model(seed_override)?;
        let dither = DitherConfig::new(self.dither.amplitudes.clone(), self.dither.epsilon, self.delay.d_max).map_err(|e| cfg_err("dither", e))?;
        let gain = GainSchedule::new(self.gains.alpha0, self.gains.lambda, self.dither.epsilon).map_err(|e| cfg_err("gains", e))?;
        let cfg = EsRunConfig {
            map,
            delay,
            dither,
            gain,
            params: EsParams { k: self.gains.k, omega_h: self.gains.omega_h, variant: self.run.variant },
            theta0: self.run.theta0.clone(),
            q0: self.uncertainty.q0,
            horizon: self.run.horizon,
            decimation: self.run.decimation.unwrap_or_else(|| default_decimation(self.run.horizon)),
        };
        cfg.validate().map_err(|e| cfg_err("run", e))?;
        Ok(cfg)
    }

    /// Certificate inputs; `variant` overrides `run.variant`.
    pub fn bound_inputs(&self, variant: Option<Variant>) -> Result<BoundInputs, CliError> {
        let b = self.bounds.clone().unwrap_or(BoundsSpec { sigma: None, sigma1: None, epsilon_star: None });
        let sigma = match (b.sigma, b.sigma1) {
            (Some(s), _) => s,
            (None, Some(s1)) => region_for_local_map(s1, self.gains.alpha0, &self.dither.amplitudes).map_err(|e| cfg_err("bounds.sigma1", e))?,
            (None, None) => 1.6 * self.uncertainty.sigma0,
        };
        let variant = variant.unwrap_or(self.run.variant);
        Ok(BoundInputs {
            n: self.map.theta_star.len(),
            d_max: self.delay.d_max,
            amplitudes: self.dither.amplitudes.clone(),
            k: self.gains.k,
            lambda: self.gains.lambda,
            omega_h: self.gains.omega_h,
            // the classical loop runs with α ≡ 1
            alpha0: if variant == Variant::Classical { 1.0 } else { self.gains.alpha0 },
            epsilon_star: b.epsilon_star.unwrap_or(self.dither.epsilon),
            sigma,
            uncertainty: self.uncertainty,
            variant,
            regime: DelayRegime::for_d_max(self.delay.d_max),
        })
    }

    pub fn search_config(&self, variant: Variant) -> SearchConfig {
        self.search.clone().unwrap_or_else(|| SearchConfig::defaults(self.uncertainty.sigma0, variant))
    }

    /// The 3-D example experiment with uniformly random delays.
    pub fn example_3d(variant: Variant, d_max: usize, epsilon: f64, horizon: u64) -> Self {
        let map = QuadraticMap::example_3d();
        Self {
            map: MapSpec { theta_star: map.theta_star().to_vec(), q_star: map.q_star(), hessian: map.hessian_rows() },
            uncertainty: UncertaintyBounds::example_3d(),
            delay: DelaySpec {
                variant: if d_max == 0 { DelayVariant::Zero } else { DelayVariant::UniformRandom },
                d_max,
                seed: (d_max > 0).then_some(1),
                d: None,
                values: None,
            },
            dither: DitherSpec { amplitudes: vec![0.1; 3], epsilon },
            gains: GainsSpec { k: 0.005, lambda: 0.005, omega_h: 0.015, alpha0: 1.0 },
            run: RunSection { variant, horizon, theta0: EXAMPLE_THETA0.to_vec(), seed: None, decimation: None },
            bounds: None,
            search: None,
        }
    }
}

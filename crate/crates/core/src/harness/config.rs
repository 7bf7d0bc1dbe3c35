//! Versioned JSON experiment configuration.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmc::MarginalFamily;
use crate::process::RateSet;
use crate::spectral::GeneratorVariant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Hydro(HydroConfig),
    Gap(GapConfig),
    Diffusion(DiffusionConfig),
    Variance(VarianceConfig),
    #[serde(rename = "greenkubo", alias = "green_kubo")]
    GreenKubo(GreenKuboConfig),
    Simulate(SimulateConfig),
    Pde(PdeConfig),
    Sample(SampleConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Hydro(_) => "hydro",
            Experiment::Gap(_) => "gap",
            Experiment::Diffusion(_) => "diffusion",
            Experiment::Variance(_) => "variance",
            Experiment::GreenKubo(_) => "greenkubo",
            Experiment::Simulate(_) => "simulate",
            Experiment::Pde(_) => "pde",
            Experiment::Sample(_) => "sample",
        }
    }
}

/// Named analytic initial profiles, functions of the first coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    /// `offset + amplitude · cos(2π mode u)`.
    Cosine {
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + amplitude · sin(2π mode u)`.
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
        #[serde(default)]
        offset: f64,
    },
    /// `left` on `[0, ½)`, `right` on `[½, 1)`.
    Step { left: f64, right: f64 },
}

fn one() -> u32 {
    1
}

impl ProfileSpec {
    pub fn eval(&self, u: &[f64]) -> f64 {
        let x = u[0];
        match *self {
            ProfileSpec::Constant { value } => value,
            ProfileSpec::Cosine { amplitude, mode, offset } => offset + amplitude * (2.0 * PI * mode as f64 * x).cos(),
            ProfileSpec::Sine { amplitude, mode, offset } => offset + amplitude * (2.0 * PI * mode as f64 * x).sin(),
            ProfileSpec::Step { left, right } => {
                if x < 0.5 {
                    left
                } else {
                    right
                }
            }
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let (lo, hi) = match *self {
            ProfileSpec::Constant { value } => (value, value),
            ProfileSpec::Cosine { amplitude, offset, .. } | ProfileSpec::Sine { amplitude, offset, .. } => {
                (offset - amplitude.abs(), offset + amplitude.abs())
            }
            ProfileSpec::Step { left, right } => (left.min(right), left.max(right)),
        };
        if !(lo >= -1.0 && hi <= 1.0) {
            return Err(config_err(field, format!("profile range [{lo}, {hi}] leaves [-1, 1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitialSpec {
    /// Independent spins; `family` defaults to the invariant measures of the rates.
    #[default]
    LocalEquilibrium,
    LocalEquilibriumWith { family: MarginalFamily },
    /// Spins set by thresholding the running integral of the profile.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The finite-difference solver.
    #[default]
    Pde,
    /// `offset + a cos(2π k u) exp(-4π²k² C_E t)`; case 3 with a cosine profile.
    AnalyticHeat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroConfig {
    pub rates: RateSet,
    #[serde(default = "one_usize")]
    pub dim: usize,
    /// Lattice sides, smallest first.
    pub sides: Vec<usize>,
    pub t_final: f64,
    /// Comparison times; `t_final` is always included.
    #[serde(default)]
    pub times: Vec<f64>,
    pub profile: ProfileSpec,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    /// Macroscopic width `(2l + 1)/N` of the averaging blocks.
    #[serde(default = "default_block_width")]
    pub block_width: f64,
    #[serde(default = "default_pde_cells")]
    pub pde_cells: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub reference: Reference,
    /// Support radius of the variational estimator for nongradient case 1.
    #[serde(default = "default_k")]
    pub variational_k: usize,
    #[serde(default = "default_residual_tol")]
    pub residual_tolerance: f64,
}

fn one_usize() -> usize {
    1
}
fn default_ensemble() -> usize {
    20
}
fn default_block_width() -> f64 {
    0.0625
}
fn default_pde_cells() -> usize {
    256
}
fn default_tolerance() -> f64 {
    0.05
}
fn default_k() -> usize {
    2
}
fn default_residual_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum GapCheck {
    /// `gap(N) N² ≥ ratio · gap(N₀) N₀²` with `N₀` the first side.
    ScalingAgainstFirst { ratio: f64 },
    /// `min_K gap / max_K gap ≥ ratio` and `min > 0` per side.
    UniformOverCharge { ratio: f64 },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChargeSpec {
    All(AllCharges),
    List(Vec<i64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllCharges {
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub rates: RateSet,
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub sides: Vec<usize>,
    pub charges: ChargeSpec,
    pub variant: GeneratorVariant,
    #[serde(default = "default_gap_check")]
    pub check: GapCheck,
}

fn default_gap_check() -> GapCheck {
    GapCheck::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DiffusionMethodSpec {
    ClosedForm,
    Variational { ks: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    pub rates: RateSet,
    /// Number of points of the uniform grid on `[-1, 1]`.
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub method: DiffusionMethodSpec,
}

fn default_grid() -> usize {
    41
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalObservable {
    /// `W_{0,e_1}`.
    Current,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceConfig {
    pub rates: RateSet,
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub observable: LocalObservable,
    pub radii: Vec<usize>,
    #[serde(default)]
    pub charge: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenKuboConfig {
    pub rates: RateSet,
    pub dim: usize,
    pub side: usize,
    pub rho: f64,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_off_diagonal_tol")]
    pub off_diagonal_tolerance: f64,
    /// Allowed distance of the diagonal from the closed form (gradient rates).
    #[serde(default = "default_tolerance")]
    pub closed_form_tolerance: f64,
}

fn default_lambdas() -> Vec<f64> {
    vec![0.5, 0.25, 0.125, 0.0625]
}
fn default_off_diagonal_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    #[default]
    Spins,
    Blocks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub rates: RateSet,
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub side: usize,
    pub t_final: f64,
    pub times: Vec<f64>,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub format: SnapshotFormat,
    #[serde(default)]
    pub block_radius: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub rates: RateSet,
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub cells: usize,
    pub t_final: f64,
    #[serde(default)]
    pub times: Vec<f64>,
    pub profile: ProfileSpec,
    #[serde(default = "default_k")]
    pub variational_k: usize,
    #[serde(default = "default_residual_tol")]
    pub residual_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ensemble", rename_all = "snake_case")]
pub enum SampleEnsemble {
    Grand { rho: f64 },
    Canonical { charge: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub rates: RateSet,
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub side: usize,
    pub measure: SampleEnsemble,
    pub count: usize,
}

pub(crate) fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err("<document>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        super::validate_experiment(&self.experiment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_errors() {
        let text = r#"{
            "schema_version": 1,
            "seed": 7,
            "experiment": {
                "kind": "hydro",
                "rates": {"c_plus": 2, "c_minus": 1, "c_exchange": 0.5, "c_annihilate": 2, "c_create": 0.5},
                "sides": [128, 512],
                "t_final": 0.05,
                "profile": {"shape": "cosine", "amplitude": 0.5}
            }
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        match &cfg.experiment {
            Experiment::Hydro(h) => {
                assert_eq!(h.ensemble, 20);
                assert_eq!(h.pde_cells, 256);
            }
            _ => panic!("wrong kind"),
        }
        let bad = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config { field, .. }) if field == "schema_version"));
        let bad = text.replace("\"amplitude\": 0.5", "\"amplitude\": 1.5");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config { .. })));
        // case 2 off its gradient condition
        let bad = text
            .replace("\"c_create\": 0.5", "\"c_create\": 0")
            .replace("\"c_annihilate\": 2", "\"c_annihilate\": 3");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config { field, .. }) if field == "experiment.rates"));
    }

    #[test]
    fn charge_spec_parses() {
        let a: ChargeSpec = serde_json::from_str("\"all\"").unwrap();
        assert_eq!(a, ChargeSpec::All(AllCharges::All));
        let b: ChargeSpec = serde_json::from_str("[0, 2]").unwrap();
        assert_eq!(b, ChargeSpec::List(vec![0, 2]));
    }
}

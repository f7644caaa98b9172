//! JSON configuration schemas for the command-line experiments.
//!
//! Every subcommand reads one JSON document. Model and prior blocks reuse
//! the library's own serde representations, so a config validates exactly
//! when the corresponding in-process construction does.

use std::path::Path;

use serde::{Deserialize, Serialize};

use heavytail::model::{Dataset, ErrorSpec, GlmConfig, ModelConfig};
use heavytail::sampler::SamplerOptions;
use heavytail::Result;

/// Default base seed for simulation and sampling.
pub const DEFAULT_SEED: u64 = 20_250_101;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_n() -> usize {
    20
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Read a `x_1,…,x_p,y` CSV file.
    Csv { path: String },
    /// Straight-line data `y_i = 1 + i + ε_i` on the design `[1, i]`.
    SimulateLinear {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// Positive responses `y_i = exp(1 + i/n) · exp(0.3 ε_i)`.
    SimulateGlm {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
}

impl DatasetSource {
    /// Materialize the dataset.
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Csv { path } => Dataset::from_csv_path(Path::new(path)),
            DatasetSource::SimulateLinear { n, seed } => Dataset::simulate_linear(*n, *seed),
            DatasetSource::SimulateGlm { n, seed } => Dataset::simulate_glm(*n, *seed),
        }
    }

    /// Replace any simulation seed (CSV sources are unaffected).
    pub fn override_seed(&mut self, seed: u64) {
        match self {
            DatasetSource::Csv { .. } => {}
            DatasetSource::SimulateLinear { seed: s, .. }
            | DatasetSource::SimulateGlm { seed: s, .. } => *s = seed,
        }
    }
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::SimulateLinear {
            n: default_n(),
            seed: default_seed(),
        }
    }
}

/// Displacement grid for the outlying observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaGrid {
    /// `points` log-spaced values from `lo` to `hi` inclusive.
    Log { lo: f64, hi: f64, points: usize },
    /// Explicit values, used as given.
    Explicit { values: Vec<f64> },
}

impl OmegaGrid {
    /// Expand into concrete grid values.
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            OmegaGrid::Log { lo, hi, points } => {
                if !(*lo > 0.0) || !(*hi > *lo) || *points < 2 {
                    return Err(heavytail::Error::Configuration(format!(
                        "log grid needs 0 < lo < hi and at least 2 points, \
                         got lo={lo}, hi={hi}, points={points}"
                    )));
                }
                let ratio = hi / lo;
                Ok((0..*points)
                    .map(|i| lo * ratio.powf(i as f64 / (*points - 1) as f64))
                    .collect())
            }
            OmegaGrid::Explicit { values } => {
                if values.is_empty() {
                    return Err(heavytail::Error::Configuration(
                        "explicit grid must not be empty".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(heavytail::Error::Configuration(
                        "grid values must be finite and non-negative".into(),
                    ));
                }
                Ok(values.clone())
            }
        }
    }
}

impl Default for OmegaGrid {
    fn default() -> Self {
        OmegaGrid::Log {
            lo: 1.0,
            hi: 1e4,
            points: 17,
        }
    }
}

/// One labeled model entry of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepModel {
    /// Tag copied into the `model_label` CSV column.
    pub label: String,
    /// Error family, prior, and outlier designation.
    pub config: ModelConfig,
}

/// Configuration of the linear-model sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub dataset: DatasetSource,
    pub models: Vec<SweepModel>,
    #[serde(default)]
    pub omega_grid: OmegaGrid,
    #[serde(default)]
    pub sampler: SamplerOptions,
    /// Also compute the marginal-ratio estimator by quadrature (needs
    /// `p ≤ 2`; considerably slower).
    #[serde(default)]
    pub include_ratio: bool,
    /// Relative tolerance for the ratio quadrature.
    #[serde(default = "default_ratio_tol")]
    pub ratio_rel_tol: f64,
}

fn default_ratio_tol() -> f64 {
    1e-7
}

/// One labeled positive-response model entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlmSweepModel {
    pub label: String,
    pub config: GlmConfig,
}

/// Configuration of the positive-response sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlmSweepConfig {
    #[serde(default = "default_glm_dataset")]
    pub dataset: DatasetSource,
    pub models: Vec<GlmSweepModel>,
    #[serde(default)]
    pub omega_grid: OmegaGrid,
    #[serde(default)]
    pub sampler: SamplerOptions,
}

fn default_glm_dataset() -> DatasetSource {
    DatasetSource::SimulateGlm {
        n: default_n(),
        seed: default_seed(),
    }
}

/// Which posterior a `fit` run samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTarget {
    #[default]
    Full,
    Limiting,
}

/// Configuration of a single posterior fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub dataset: DatasetSource,
    pub model: ModelConfig,
    #[serde(default)]
    pub sampler: SamplerOptions,
    #[serde(default)]
    pub target: FitTarget,
    /// Displace the designated outliers this far before fitting.
    #[serde(default)]
    pub omega: Option<f64>,
}

/// Configuration of the conjugate closed-form report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateConfig {
    #[serde(default)]
    pub dataset: DatasetSource,
    pub shape: f64,
    pub scale: f64,
}

/// Configuration of the breakdown report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakdownConfig {
    pub error: ErrorSpec,
    pub n: usize,
    pub outlier_count: usize,
    /// Shape of the conjugate inverse-gamma prior, when the refined
    /// moment margin is wanted.
    #[serde(default)]
    pub conjugate_shape: Option<f64>,
}

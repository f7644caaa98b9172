//! Regression datasets, priors, and posterior evaluations.
//!
//! The linear model observes `y_i = x_iᵀβ + σ ε_i` with the standardized
//! errors `ε_i` drawn from one of the [`ErrorDensity`] families. Working in
//! `γ = ln σ²`, the unnormalized log posterior (all constants kept, so its
//! exponential integrates to the marginal likelihood) is
//!
//! ```text
//! ln π(β, γ | y) = ln π(γ) + ln π(β | γ)
//!                  - (n/2) γ + Σ_i ln f((y_i - x_iᵀβ) e^{-γ/2})
//! ```
//!
//! where `ln π(γ)` already contains the `σ² ↦ γ` Jacobian. Two prior
//! families are supported: the conjugate `β | σ² ~ N(0, σ² I)`,
//! `σ² ~ InvGamma(a, b)`, and independent sub-exponential coefficient priors
//! with a separate variance prior.
//!
//! Observations can be sent to infinity along controlled paths: an outlier
//! `i` moves as `y_i(ω) = |y_i| + b_i ω` with `b_i ≥ 1`. The *limiting
//! posterior* is what the full posterior converges to as `ω → ∞`:
//!
//! ```text
//! ln π_∞(β, γ) = ln π(β, γ | y restricted to non-outliers)
//!                + (α |O| / 2) γ      (power tails only)
//! ```
//!
//! — the extreme observations drop out entirely, leaving a `σ^α` factor per
//! outlier for regularly varying errors and nothing at all for
//! log-regularly varying ones. The construction is rejected when the
//! leftover factor would make the density non-integrable (`n - |O| ≤ α|O|`).
//!
//! For positive responses, [`GlmModel`] implements the multiplicative model
//! `y_i = exp(x_iᵀβ) z_i` with `z_i` from a [`RobustGammaDensity`]; its
//! limiting posterior is simply the posterior of the retained observations.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{ErrorDensity, RobustGammaDensity, TailClass};
use crate::special::{log_gamma, LN_SQRT_2PI};
use crate::{Error, Result};

/// A fixed design matrix with responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    /// Wrap a design matrix (`n × p`) and response vector (`n`).
    ///
    /// An empty dataset (`n = 0`) is allowed — the posterior then reduces to
    /// the prior — but every stored entry must be finite. The CSV loader is
    /// stricter and insists on at least one observation.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Dimension("design needs at least one column".into()));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset entries must be finite".into()));
        }
        Ok(Dataset { x, y })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Design matrix.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Responses.
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Linear predictor `x_iᵀβ` of one observation.
    pub fn predictor(&self, i: usize, beta: &DVector<f64>) -> f64 {
        self.x.row(i).transpose().dot(beta)
    }

    /// The rows listed in `keep`, in the given order.
    pub fn subset(&self, keep: &[usize]) -> Result<Dataset> {
        for &i in keep {
            if i >= self.n() {
                return Err(Error::Dimension(format!(
                    "subset index {i} out of range for {} observations",
                    self.n()
                )));
            }
        }
        let x = DMatrix::from_fn(keep.len(), self.p(), |r, c| self.x[(keep[r], c)]);
        let y = DVector::from_fn(keep.len(), |r, _| self.y[keep[r]]);
        Ok(Dataset { x, y })
    }

    /// Simulated baseline for the linear model: intercept plus trend design
    /// `x_i = (1, i)`, responses `y_i = 1 + i + ε_i` with standard normal
    /// noise from a seeded generator.
    pub fn simulate_linear(n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { (r + 1) as f64 });
        let y = DVector::from_fn(n, |r, _| {
            let eps: f64 = rng.sample(StandardNormal);
            1.0 + (r + 1) as f64 + eps
        });
        Dataset::new(x, y)
    }

    /// Simulated baseline for the positive-response model: design
    /// `x_i = (1, i/n)`, responses `y_i = exp(x_iᵀ(1,1)) · exp(0.3 ε_i)`.
    pub fn simulate_glm(n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 2, |r, c| {
            if c == 0 {
                1.0
            } else {
                (r + 1) as f64 / n as f64
            }
        });
        let y = DVector::from_fn(n, |r, _| {
            let eps: f64 = rng.sample(StandardNormal);
            (x[(r, 0)] + x[(r, 1)] + 0.3 * eps).exp()
        });
        Dataset::new(x, y)
    }

    /// Load a dataset from a CSV file with header `x_1,…,x_p,y`.
    ///
    /// # Errors
    ///
    /// I/O errors carry the path; malformed headers, non-numeric fields, and
    /// empty files are CSV errors.
    pub fn from_csv_path(path: &Path) -> Result<Dataset> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| Error::csv(path.display().to_string(), e.to_string()))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::csv(path.display().to_string(), e.to_string()))?
            .clone();
        if headers.len() < 2 || headers.iter().next_back() != Some("y") {
            return Err(Error::csv(
                path.display().to_string(),
                format!("expected header x_1,…,x_p,y, got {headers:?}"),
            ));
        }
        let p = headers.len() - 1;
        for (k, name) in headers.iter().take(p).enumerate() {
            let expected = format!("x_{}", k + 1);
            if name != expected {
                return Err(Error::csv(
                    path.display().to_string(),
                    format!("column {k} named {name:?}, expected {expected:?}"),
                ));
            }
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in reader.records() {
            let record =
                record.map_err(|e| Error::csv(path.display().to_string(), e.to_string()))?;
            if record.len() != p + 1 {
                return Err(Error::csv(
                    path.display().to_string(),
                    format!("record has {} fields, expected {}", record.len(), p + 1),
                ));
            }
            let row = record
                .iter()
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| {
                        Error::csv(
                            path.display().to_string(),
                            format!("non-numeric field {f:?}"),
                        )
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::csv(path.display().to_string(), "no observations"));
        }
        let n = rows.len();
        let x = DMatrix::from_fn(n, p, |r, c| rows[r][c]);
        let y = DVector::from_fn(n, |r, _| rows[r][p]);
        Dataset::new(x, y)
    }

    /// Write the dataset as CSV with full `f64` round-trip precision.
    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut header: Vec<String> = (1..=self.p()).map(|k| format!("x_{k}")).collect();
        header.push("y".into());
        let mut out = header.join(",");
        out.push('\n');
        for i in 0..self.n() {
            let mut fields: Vec<String> =
                (0..self.p()).map(|c| format!("{:.16e}", self.x[(i, c)])).collect();
            fields.push(format!("{:.16e}", self.y[i]));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Direction an extreme positive response moves in: off to infinity or
/// collapsing to zero. Linear-model paths always go large.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Large,
    Small,
}

fn default_direction() -> Direction {
    Direction::default()
}

/// One observation designated as an outlier, with its drift rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outlier {
    /// Row index into the dataset.
    pub index: usize,
    /// Drift rate `b_i ≥ 1`: the observation moves as `|y_i| + b_i ω`
    /// (linear model) or `b_i ω` / `1/(b_i ω)` (positive responses).
    pub rate: f64,
    /// Drift direction for positive-response models.
    #[serde(default = "default_direction")]
    pub direction: Direction,
}

fn validate_outliers(outliers: &[Outlier], n: usize) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for o in outliers {
        if o.index >= n {
            return Err(Error::Configuration(format!(
                "outlier index {} out of range for {n} observations",
                o.index
            )));
        }
        if !seen.insert(o.index) {
            return Err(Error::Configuration(format!(
                "outlier index {} listed twice",
                o.index
            )));
        }
        if !o.rate.is_finite() || o.rate < 1.0 {
            return Err(Error::Configuration(format!(
                "outlier rate must satisfy b ≥ 1, got {}",
                o.rate
            )));
        }
    }
    Ok(())
}

/// Error-law choice for the linear model, as it appears in configuration
/// files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorSpec {
    Normal,
    StudentT { nu: f64 },
    Lptn { rho: f64 },
}

impl ErrorSpec {
    /// Construct the density, validating hyperparameters.
    pub fn build(&self) -> Result<ErrorDensity> {
        match self {
            ErrorSpec::Normal => Ok(ErrorDensity::normal()),
            ErrorSpec::StudentT { nu } => ErrorDensity::student_t(*nu),
            ErrorSpec::Lptn { rho } => ErrorDensity::lptn(*rho),
        }
    }
}

impl std::fmt::Display for ErrorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ErrorSpec::Normal => write!(f, "normal"),
            ErrorSpec::StudentT { nu } => write!(f, "student_t(nu={nu})"),
            ErrorSpec::Lptn { rho } => write!(f, "lptn(rho={rho})"),
        }
    }
}

/// Prior on one regression coefficient (independent across coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientPrior {
    /// `β_j ~ N(0, sd²)`.
    Normal { sd: f64 },
    /// `β_j ~ Laplace(0, scale)`.
    Laplace { scale: f64 },
}

impl CoefficientPrior {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            CoefficientPrior::Normal { sd } => sd.is_finite() && *sd > 0.0,
            CoefficientPrior::Laplace { scale } => scale.is_finite() && *scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Hyperparameter(format!(
                "coefficient prior needs a positive finite scale: {self:?}"
            )))
        }
    }

    /// Log-density summed over the coordinates of `beta`.
    pub fn ln_pdf(&self, beta: &DVector<f64>) -> f64 {
        match self {
            CoefficientPrior::Normal { sd } => beta
                .iter()
                .map(|b| -LN_SQRT_2PI - sd.ln() - 0.5 * (b / sd).powi(2))
                .sum(),
            CoefficientPrior::Laplace { scale } => beta
                .iter()
                .map(|b| -(2.0 * scale).ln() - b.abs() / scale)
                .sum(),
        }
    }

    /// Coordinate-wise gradient of [`Self::ln_pdf`]. The Laplace prior has a
    /// kink at zero where the reported value is a subgradient.
    pub fn grad_ln_pdf(&self, beta: &DVector<f64>) -> DVector<f64> {
        match self {
            CoefficientPrior::Normal { sd } => beta.map(|b| -b / (sd * sd)),
            CoefficientPrior::Laplace { scale } => {
                beta.map(|b| if b == 0.0 { 0.0 } else { -b.signum() / scale })
            }
        }
    }
}

/// Prior on the noise variance `σ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sigma2Prior {
    /// `σ² ~ InvGamma(shape, scale)`.
    InvGamma { shape: f64, scale: f64 },
    /// `ln σ² ~ N(mu, sd²)`.
    LogNormal { mu: f64, sd: f64 },
}

impl Sigma2Prior {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Sigma2Prior::InvGamma { shape, scale } => {
                shape.is_finite() && *shape > 0.0 && scale.is_finite() && *scale > 0.0
            }
            Sigma2Prior::LogNormal { mu, sd } => mu.is_finite() && sd.is_finite() && *sd > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Hyperparameter(format!(
                "variance prior has invalid hyperparameters: {self:?}"
            )))
        }
    }

    /// Log-density in `γ = ln σ²`, including the change-of-variables
    /// Jacobian `+γ`.
    pub fn ln_pdf_gamma(&self, gamma: f64) -> f64 {
        match self {
            Sigma2Prior::InvGamma { shape, scale } => {
                shape * scale.ln() - log_gamma(*shape).expect("validated shape")
                    - (shape + 1.0) * gamma
                    - scale * (-gamma).exp()
                    + gamma
            }
            Sigma2Prior::LogNormal { mu, sd } => {
                // The τ⁻¹ factor of the log-normal density cancels the
                // Jacobian: γ is exactly N(mu, sd²).
                -LN_SQRT_2PI - sd.ln() - 0.5 * ((gamma - mu) / sd).powi(2)
            }
        }
    }

    /// Derivative of [`Self::ln_pdf_gamma`] with respect to `γ`.
    pub fn d_ln_pdf_gamma(&self, gamma: f64) -> f64 {
        match self {
            Sigma2Prior::InvGamma { shape, scale } => {
                -(shape + 1.0) + scale * (-gamma).exp() + 1.0
            }
            Sigma2Prior::LogNormal { mu, sd } => -(gamma - mu) / (sd * sd),
        }
    }
}

/// Joint prior on `(β, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// `β | σ² ~ N(0, σ² I)`, `σ² ~ InvGamma(shape, scale)`: conjugate under
    /// normal errors, so marginal likelihoods have closed forms to test
    /// against.
    ConjugateNormalInvGamma { shape: f64, scale: f64 },
    /// Independent coefficients and variance.
    IndependentSubExponential {
        coefficients: CoefficientPrior,
        sigma2: Sigma2Prior,
    },
}

impl PriorSpec {
    fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::ConjugateNormalInvGamma { shape, scale } => {
                if shape.is_finite() && *shape > 0.0 && scale.is_finite() && *scale > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Hyperparameter(format!(
                        "inverse-gamma prior needs positive shape and scale, got \
                         shape = {shape}, scale = {scale}"
                    )))
                }
            }
            PriorSpec::IndependentSubExponential {
                coefficients,
                sigma2,
            } => {
                coefficients.validate()?;
                sigma2.validate()
            }
        }
    }

    /// Log prior density at `(β, γ)`, Jacobian included.
    pub fn ln_pdf(&self, beta: &DVector<f64>, gamma: f64) -> f64 {
        let p = beta.len() as f64;
        match self {
            PriorSpec::ConjugateNormalInvGamma { shape, scale } => {
                let ig = Sigma2Prior::InvGamma {
                    shape: *shape,
                    scale: *scale,
                };
                ig.ln_pdf_gamma(gamma)
                    - 0.5 * p * (2.0 * LN_SQRT_2PI + gamma)
                    - 0.5 * (-gamma).exp() * beta.dot(beta)
            }
            PriorSpec::IndependentSubExponential {
                coefficients,
                sigma2,
            } => coefficients.ln_pdf(beta) + sigma2.ln_pdf_gamma(gamma),
        }
    }

    /// Gradient of [`Self::ln_pdf`] in `(β, γ)`.
    pub fn grad_ln_pdf(&self, beta: &DVector<f64>, gamma: f64) -> (DVector<f64>, f64) {
        match self {
            PriorSpec::ConjugateNormalInvGamma { shape, scale } => {
                let ig = Sigma2Prior::InvGamma {
                    shape: *shape,
                    scale: *scale,
                };
                let p = beta.len() as f64;
                let inv_sigma2 = (-gamma).exp();
                let grad_beta = beta.map(|b| -inv_sigma2 * b);
                let grad_gamma =
                    ig.d_ln_pdf_gamma(gamma) - 0.5 * p + 0.5 * inv_sigma2 * beta.dot(beta);
                (grad_beta, grad_gamma)
            }
            PriorSpec::IndependentSubExponential {
                coefficients,
                sigma2,
            } => (
                coefficients.grad_ln_pdf(beta),
                sigma2.d_ln_pdf_gamma(gamma),
            ),
        }
    }

    /// Inverse-gamma hyperparameters when the prior is the conjugate family.
    pub fn conjugate_shape_scale(&self) -> Option<(f64, f64)> {
        match self {
            PriorSpec::ConjugateNormalInvGamma { shape, scale } => Some((*shape, *scale)),
            PriorSpec::IndependentSubExponential { .. } => None,
        }
    }
}

/// Configuration of a linear model: error law, prior, and which
/// observations are treated as outliers. Datasets travel separately (as
/// CSV), so configurations stay small and diff-friendly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub error: ErrorSpec,
    pub prior: PriorSpec,
    #[serde(default)]
    pub outliers: Vec<Outlier>,
}

/// A point in the sampling space `(β, γ = ln σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint {
    pub beta: DVector<f64>,
    pub gamma: f64,
}

impl ParameterPoint {
    /// Unpack from a flat coordinate vector `[β₁, …, β_p, γ]`.
    pub fn from_flat(v: &[f64]) -> Result<ParameterPoint> {
        if v.is_empty() {
            return Err(Error::Dimension(
                "parameter vector needs at least a γ coordinate".into(),
            ));
        }
        Ok(ParameterPoint {
            beta: DVector::from_column_slice(&v[..v.len() - 1]),
            gamma: v[v.len() - 1],
        })
    }

    /// Flatten to `[β₁, …, β_p, γ]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.beta.iter().copied().collect();
        v.push(self.gamma);
        v
    }
}

/// A linear model bound to a dataset, ready for posterior evaluation.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    dataset: Dataset,
    density: ErrorDensity,
}

impl Model {
    /// Validate the configuration against the dataset and cache the built
    /// error density.
    pub fn new(config: ModelConfig, dataset: Dataset) -> Result<Model> {
        config.prior.validate()?;
        let density = config.error.build()?;
        validate_outliers(&config.outliers, dataset.n())?;
        Ok(Model {
            config,
            dataset,
            density,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn density(&self) -> &ErrorDensity {
        &self.density
    }

    /// Outlier row indices, sorted.
    pub fn outlier_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.config.outliers.iter().map(|o| o.index).collect();
        idx.sort_unstable();
        idx
    }

    /// Row indices retained by the limiting posterior, sorted.
    pub fn retained_indices(&self) -> Vec<usize> {
        let out: std::collections::HashSet<usize> =
            self.outlier_indices().into_iter().collect();
        (0..self.dataset.n()).filter(|i| !out.contains(i)).collect()
    }

    /// Number of coordinates in the sampling space `(β, γ)`.
    pub fn dim(&self) -> usize {
        self.dataset.p() + 1
    }

    fn check_point(&self, point: &ParameterPoint) -> Result<()> {
        if point.beta.len() != self.dataset.p() {
            return Err(Error::Dimension(format!(
                "β has {} coordinates, design has {} columns",
                point.beta.len(),
                self.dataset.p()
            )));
        }
        if !point.gamma.is_finite() || point.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("parameter point must be finite".into()));
        }
        Ok(())
    }

    /// Dataset with the outliers displaced to `|y_i| + b_i ω` (sign forced
    /// positive); other rows are untouched.
    ///
    /// # Errors
    ///
    /// Domain error for `ω < 0` or non-finite `ω`.
    pub fn displaced_dataset(&self, omega: f64) -> Result<Dataset> {
        if !omega.is_finite() || omega < 0.0 {
            return Err(Error::Domain(format!(
                "displacement requires ω ≥ 0, got {omega}"
            )));
        }
        let mut y = self.dataset.y.clone();
        for o in &self.config.outliers {
            y[o.index] = self.dataset.y[o.index].abs() + o.rate * omega;
        }
        Dataset::new(self.dataset.x.clone(), y)
    }

    /// A copy of this model holding the displaced dataset.
    pub fn displaced(&self, omega: f64) -> Result<Model> {
        Ok(Model {
            config: self.config.clone(),
            dataset: self.displaced_dataset(omega)?,
            density: self.density,
        })
    }

    /// Log prior at a point (Jacobian included).
    pub fn log_prior(&self, point: &ParameterPoint) -> Result<f64> {
        self.check_point(point)?;
        Ok(self.config.prior.ln_pdf(&point.beta, point.gamma))
    }

    /// Log likelihood `-(n/2) γ + Σ ln f((y_i - x_iᵀβ) e^{-γ/2})`.
    pub fn log_likelihood(&self, point: &ParameterPoint) -> Result<f64> {
        self.check_point(point)?;
        Ok(self.log_likelihood_rows(point, None))
    }

    /// Full log posterior: prior plus likelihood, with every normalization
    /// constant kept so `∬ exp` equals the marginal likelihood.
    pub fn log_posterior(&self, point: &ParameterPoint) -> Result<f64> {
        Ok(self.log_prior(point)? + self.log_likelihood(point)?)
    }

    /// Likelihood over `rows` (all rows when `None`).
    fn log_likelihood_rows(&self, point: &ParameterPoint, rows: Option<&[usize]>) -> f64 {
        let half_gamma = 0.5 * point.gamma;
        let inv_sigma = (-half_gamma).exp();
        let term = |i: usize| {
            let u = (self.dataset.y[i] - self.dataset.predictor(i, &point.beta)) * inv_sigma;
            self.density.ln_pdf(u) - half_gamma
        };
        match rows {
            None => (0..self.dataset.n()).map(term).sum(),
            Some(rows) => rows.iter().map(|&i| term(i)).sum(),
        }
    }

    /// Gradient of the full log posterior in `(β, γ)`.
    pub fn grad_log_posterior(&self, point: &ParameterPoint) -> Result<ParameterPoint> {
        self.check_point(point)?;
        let (mut grad_beta, mut grad_gamma) =
            self.config.prior.grad_ln_pdf(&point.beta, point.gamma);
        let (lb, lg) = self.grad_log_likelihood_rows(point, None);
        grad_beta += lb;
        grad_gamma += lg;
        Ok(ParameterPoint {
            beta: grad_beta,
            gamma: grad_gamma,
        })
    }

    /// Gradient of the likelihood over `rows`:
    /// `∂β = -e^{-γ/2} Σ (ln f)'(u_i) x_i`,
    /// `∂γ = -m/2 - ½ Σ (ln f)'(u_i) u_i` for `m` retained rows.
    fn grad_log_likelihood_rows(
        &self,
        point: &ParameterPoint,
        rows: Option<&[usize]>,
    ) -> (DVector<f64>, f64) {
        let half_gamma = 0.5 * point.gamma;
        let inv_sigma = (-half_gamma).exp();
        let mut grad_beta = DVector::zeros(self.dataset.p());
        let mut grad_gamma = 0.0;
        let mut count = 0usize;
        let mut visit = |i: usize| {
            let u = (self.dataset.y[i] - self.dataset.predictor(i, &point.beta)) * inv_sigma;
            let score = self.density.d_ln_pdf(u);
            for c in 0..self.dataset.p() {
                grad_beta[c] -= score * self.dataset.x[(i, c)] * inv_sigma;
            }
            grad_gamma -= 0.5 * score * u;
            count += 1;
        };
        match rows {
            None => (0..self.dataset.n()).for_each(&mut visit),
            Some(rows) => rows.iter().for_each(|&i| visit(i)),
        }
        grad_gamma -= 0.5 * count as f64;
        (grad_beta, grad_gamma)
    }

    /// Tail-dependent `γ` coefficient of the limiting posterior: `α|O|/2`
    /// for power tails, `0` for log-regularly varying tails.
    ///
    /// # Errors
    ///
    /// Tail-class error for normal errors; configuration error when power
    /// tails leave a non-integrable limit (`n - |O| ≤ α|O|`).
    fn limiting_gamma_coefficient(&self) -> Result<f64> {
        let k = self.config.outliers.len() as f64;
        let retained = (self.dataset.n() - self.config.outliers.len()) as f64;
        match self.density.tail_class() {
            TailClass::RegularlyVarying { alpha, .. } => {
                if retained <= alpha * k {
                    return Err(Error::Configuration(format!(
                        "limiting posterior is not integrable: {retained} retained \
                         observations vs tail index {alpha} × {k} outliers"
                    )));
                }
                Ok(0.5 * alpha * k)
            }
            TailClass::LogRegularlyVarying { .. } => Ok(0.0),
            TailClass::ExponentialTail => Err(Error::TailClass(
                "normal errors admit no limiting posterior under drifting outliers".into(),
            )),
        }
    }

    /// Whether this configuration admits a proper limiting posterior:
    /// heavy tails, and (for power tails) an outlier fraction small enough
    /// to keep the limit integrable.
    pub fn has_limiting_posterior(&self) -> bool {
        self.limiting_gamma_coefficient().is_ok()
    }

    /// Log density of the limiting posterior: prior, likelihood of the
    /// retained observations, and the leftover `(α|O|/2) γ` for power tails.
    /// Does not depend on the current values of the outlying responses.
    pub fn log_limiting_posterior(&self, point: &ParameterPoint) -> Result<f64> {
        self.check_point(point)?;
        let coeff = self.limiting_gamma_coefficient()?;
        let rows = self.retained_indices();
        Ok(self.config.prior.ln_pdf(&point.beta, point.gamma)
            + self.log_likelihood_rows(point, Some(&rows))
            + coeff * point.gamma)
    }

    /// Gradient of [`Self::log_limiting_posterior`].
    pub fn grad_log_limiting_posterior(&self, point: &ParameterPoint) -> Result<ParameterPoint> {
        self.check_point(point)?;
        let coeff = self.limiting_gamma_coefficient()?;
        let rows = self.retained_indices();
        let (mut grad_beta, mut grad_gamma) =
            self.config.prior.grad_ln_pdf(&point.beta, point.gamma);
        let (lb, lg) = self.grad_log_likelihood_rows(point, Some(&rows));
        grad_beta += lb;
        grad_gamma += lg + coeff;
        Ok(ParameterPoint {
            beta: grad_beta,
            gamma: grad_gamma,
        })
    }

    /// Robustness verdicts for this model's outlier configuration.
    pub fn breakdown_report(&self) -> Result<BreakdownReport> {
        breakdown_check(
            &self.density.tail_class(),
            self.dataset.n(),
            self.config.outliers.len(),
            self.config.prior.conjugate_shape_scale().map(|(a, _)| a),
        )
    }
}

/// Outcome of checking an outlier configuration against the tail class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    /// Observations in total.
    pub n: usize,
    /// Designated outliers `|O|`.
    pub outlier_count: usize,
    /// Tail index `α` of the error law.
    pub alpha: f64,
    /// Largest outlier fraction the law can absorb: `1/(α+1)` for power
    /// tails, `1/2` for log-regularly varying tails.
    pub breakdown_fraction: f64,
    /// Actual fraction `|O|/n`.
    pub outlier_fraction: f64,
    /// Whether the tail condition for a proper limit holds:
    /// `n - |O| > α|O|` (power tails) or `n - |O| ≥ |O|` (log tails).
    pub condition_holds: bool,
    /// Integrability margin `(n - |O| - α|O|)/2 + a` for the conjugate
    /// inverse-gamma prior with shape `a`; positive values guarantee the
    /// limiting posterior keeps a finite variance moment. `None` when the
    /// prior is not in the conjugate family or the tails are not power-law.
    pub moment_margin: Option<f64>,
    /// `moment_margin > 0`, when defined.
    pub moment_condition_holds: Option<bool>,
}

/// Evaluate the outlier-fraction conditions for a tail class, with the
/// sharper moment margin available under the conjugate prior.
///
/// # Errors
///
/// Tail-class error for exponential tails; dimension error when
/// `outlier_count > n`.
pub fn breakdown_check(
    tail: &TailClass,
    n: usize,
    outlier_count: usize,
    conjugate_shape: Option<f64>,
) -> Result<BreakdownReport> {
    if outlier_count > n {
        return Err(Error::Dimension(format!(
            "{outlier_count} outliers among {n} observations"
        )));
    }
    let alpha = tail.alpha().ok_or_else(|| {
        Error::TailClass("breakdown analysis needs heavy tails".into())
    })?;
    let breakdown_fraction = tail.breakdown_fraction()?;
    let retained = (n - outlier_count) as f64;
    let k = outlier_count as f64;
    let condition_holds = match tail {
        TailClass::RegularlyVarying { .. } => retained > alpha * k,
        TailClass::LogRegularlyVarying { .. } => retained >= k,
        TailClass::ExponentialTail => unreachable!("rejected above"),
    };
    let moment_margin = match tail {
        TailClass::RegularlyVarying { .. } => {
            conjugate_shape.map(|a| 0.5 * (retained - alpha * k) + a)
        }
        _ => None,
    };
    Ok(BreakdownReport {
        n,
        outlier_count,
        alpha,
        breakdown_fraction,
        outlier_fraction: if n == 0 { 0.0 } else { k / n as f64 },
        condition_holds,
        moment_margin,
        moment_condition_holds: moment_margin.map(|m| m > 0.0),
    })
}

/// Configuration of a positive-response model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlmConfig {
    /// Shape of the modified gamma noise density.
    pub nu: f64,
    /// Tail-placement constant of the noise density.
    pub c: f64,
    /// Prior on the regression coefficients.
    pub prior: CoefficientPrior,
    #[serde(default)]
    pub outliers: Vec<Outlier>,
}

/// Multiplicative model for positive responses, `y_i = exp(x_iᵀβ) z_i`
/// with `z_i` from a [`RobustGammaDensity`]; the per-observation log
/// likelihood is `-η_i + L(ln y_i - η_i)` for `η_i = x_iᵀβ`,
/// `L = ln f_Z ∘ exp`.
#[derive(Debug, Clone)]
pub struct GlmModel {
    config: GlmConfig,
    dataset: Dataset,
    density: RobustGammaDensity,
}

impl GlmModel {
    /// Validate and bind: responses must be strictly positive, and any
    /// outlier drifting toward zero requires the noise density to carry a
    /// left tail.
    pub fn new(config: GlmConfig, dataset: Dataset) -> Result<GlmModel> {
        config.prior.validate()?;
        let density = RobustGammaDensity::new(config.nu, config.c)?;
        validate_outliers(&config.outliers, dataset.n())?;
        if dataset.y().iter().any(|&y| y <= 0.0) {
            return Err(Error::Domain(
                "positive-response model requires y > 0 for every observation".into(),
            ));
        }
        if config
            .outliers
            .iter()
            .any(|o| o.direction == Direction::Small)
            && !density.has_left_tail()
        {
            return Err(Error::Configuration(format!(
                "outliers drifting to zero need a left tail, but robust_gamma(nu={}, c={}) \
                 has none",
                config.nu, config.c
            )));
        }
        Ok(GlmModel {
            config,
            dataset,
            density,
        })
    }

    pub fn config(&self) -> &GlmConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn density(&self) -> &RobustGammaDensity {
        &self.density
    }

    /// Number of sampling coordinates (`p`; there is no scale parameter).
    pub fn dim(&self) -> usize {
        self.dataset.p()
    }

    /// Outlier row indices, sorted.
    pub fn outlier_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.config.outliers.iter().map(|o| o.index).collect();
        idx.sort_unstable();
        idx
    }

    /// Row indices retained by the limiting posterior, sorted.
    pub fn retained_indices(&self) -> Vec<usize> {
        let out: std::collections::HashSet<usize> =
            self.outlier_indices().into_iter().collect();
        (0..self.dataset.n()).filter(|i| !out.contains(i)).collect()
    }

    /// Least-squares fit of `ln y` on the design over the retained rows:
    /// a deterministic starting point in the region where the posterior
    /// concentrates (the multiplicative noise only shifts the intercept).
    pub fn initial_beta(&self) -> DVector<f64> {
        let p = self.dataset.p();
        let mut xtx = DMatrix::<f64>::identity(p, p) * 1e-9;
        let mut xty = DVector::<f64>::zeros(p);
        for &i in &self.retained_indices() {
            let ln_y = self.dataset.y[i].ln();
            for a in 0..p {
                xty[a] += self.dataset.x[(i, a)] * ln_y;
                for b in 0..p {
                    xtx[(a, b)] += self.dataset.x[(i, a)] * self.dataset.x[(i, b)];
                }
            }
        }
        match nalgebra::Cholesky::new(xtx) {
            Some(chol) => chol.solve(&xty),
            None => DVector::zeros(p),
        }
    }

    fn check_beta(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.dataset.p() {
            return Err(Error::Dimension(format!(
                "β has {} coordinates, design has {} columns",
                beta.len(),
                self.dataset.p()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("parameter point must be finite".into()));
        }
        Ok(())
    }

    /// Dataset with outliers displaced to `b_i ω` (large) or `1/(b_i ω)`
    /// (small); other rows untouched.
    ///
    /// # Errors
    ///
    /// Domain error unless `ω > 0` (responses must stay positive).
    pub fn displaced_dataset(&self, omega: f64) -> Result<Dataset> {
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::Domain(format!(
                "positive-response displacement requires ω > 0, got {omega}"
            )));
        }
        let mut y = self.dataset.y.clone();
        for o in &self.config.outliers {
            y[o.index] = match o.direction {
                Direction::Large => o.rate * omega,
                Direction::Small => 1.0 / (o.rate * omega),
            };
        }
        Dataset::new(self.dataset.x.clone(), y)
    }

    /// A copy of this model holding the displaced dataset.
    pub fn displaced(&self, omega: f64) -> Result<GlmModel> {
        Ok(GlmModel {
            config: self.config.clone(),
            dataset: self.displaced_dataset(omega)?,
            density: self.density,
        })
    }

    /// Log likelihood over all rows.
    pub fn log_likelihood(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check_beta(beta)?;
        Ok(self.log_likelihood_rows(beta, None))
    }

    fn log_likelihood_rows(&self, beta: &DVector<f64>, rows: Option<&[usize]>) -> f64 {
        let term = |i: usize| {
            let eta = self.dataset.predictor(i, beta);
            let w = self.dataset.y[i].ln() - eta;
            -eta + self.density.ln_pdf_at_ln(w)
        };
        match rows {
            None => (0..self.dataset.n()).map(term).sum(),
            Some(rows) => rows.iter().map(|&i| term(i)).sum(),
        }
    }

    /// Log posterior: coefficient prior plus likelihood, constants kept.
    pub fn log_posterior(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check_beta(beta)?;
        Ok(self.config.prior.ln_pdf(beta) + self.log_likelihood_rows(beta, None))
    }

    /// Gradient of the log posterior:
    /// `∂β = prior' - Σ x_i (1 + L'(w_i))`.
    pub fn grad_log_posterior(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_beta(beta)?;
        let mut grad = self.config.prior.grad_ln_pdf(beta);
        self.accumulate_grad_rows(beta, None, &mut grad);
        Ok(grad)
    }

    fn accumulate_grad_rows(
        &self,
        beta: &DVector<f64>,
        rows: Option<&[usize]>,
        grad: &mut DVector<f64>,
    ) {
        let mut visit = |i: usize| {
            let eta = self.dataset.predictor(i, beta);
            let w = self.dataset.y[i].ln() - eta;
            let slope = 1.0 + self.density.d_ln_pdf_at_ln(w);
            for c in 0..self.dataset.p() {
                grad[c] -= slope * self.dataset.x[(i, c)];
            }
        };
        match rows {
            None => (0..self.dataset.n()).for_each(&mut visit),
            Some(rows) => rows.iter().for_each(|&i| visit(i)),
        }
    }

    /// Log density of the limiting posterior: prior plus the likelihood of
    /// the retained observations. The log-Pareto tails leave no residual
    /// factor, so extreme observations vanish from the posterior entirely.
    pub fn log_limiting_posterior(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check_beta(beta)?;
        let rows = self.retained_indices();
        Ok(self.config.prior.ln_pdf(beta) + self.log_likelihood_rows(beta, Some(&rows)))
    }

    /// Gradient of [`Self::log_limiting_posterior`].
    pub fn grad_log_limiting_posterior(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_beta(beta)?;
        let rows = self.retained_indices();
        let mut grad = self.config.prior.grad_ln_pdf(beta);
        self.accumulate_grad_rows(beta, Some(&rows), &mut grad);
        Ok(grad)
    }
}

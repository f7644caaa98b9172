//! Displacement sweeps: drag designated outliers outward and record how
//! posterior summaries respond.
//!
//! For every grid value of the displacement ω and every configured model,
//! the runner fits the posterior on the displaced data and records the
//! mean of the tracked coefficient (the slope for `p ≥ 2`). Normal-error
//! models under the conjugate prior use the closed form — the posterior
//! expectation of β is the ridge solution — and carry zero Monte Carlo
//! error; everything else is sampled. Models that admit a proper limiting
//! posterior are additionally fitted once against that ω-free target, and
//! the resulting mean is replicated across the grid so every estimator has
//! one row per ω.
//!
//! Output is a CSV with the fixed header
//! `omega,model_label,estimator,value,mcse,n_samples,seed`, RFC-4180
//! quoting, LF line endings, floats at 17 significant digits, and rows
//! sorted by (model_label, estimator, omega): byte-identical output for a
//! fixed config and seed.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use heavytail::conjugate::conjugate_fit;
use heavytail::density::TailClass;
use heavytail::marginal::{theorem_ratio, QuadratureSettings};
use heavytail::model::{GlmModel, Model};
use heavytail::sampler::{
    run_chains, scalar_summary, ChainSamples, GlmLimitingPosterior, GlmPosterior,
    LinearLimitingPosterior, LinearPosterior, SamplerOptions, ScalarSummary,
};
use heavytail::{Error, Result};

use crate::config::{FitTarget, GlmSweepConfig, SweepConfig};

/// What a sweep row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Posterior mean of the tracked coefficient on the displaced data.
    PosteriorMeanBeta2,
    /// Mean of the same coefficient under the limiting posterior.
    LimitingMeanBeta2,
    /// Marginal-ratio limit check by quadrature.
    TheoremRatio,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::PosteriorMeanBeta2 => "posterior_mean_beta2",
            Estimator::LimitingMeanBeta2 => "limiting_mean_beta2",
            Estimator::TheoremRatio => "theorem_ratio",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "posterior_mean_beta2" => Ok(Estimator::PosteriorMeanBeta2),
            "limiting_mean_beta2" => Ok(Estimator::LimitingMeanBeta2),
            "theorem_ratio" => Ok(Estimator::TheoremRatio),
            other => Err(Error::Configuration(format!(
                "unknown estimator `{other}`"
            ))),
        }
    }
}

/// One output row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub omega: f64,
    pub model_label: String,
    pub estimator: Estimator,
    pub value: f64,
    /// Monte Carlo standard error; exactly 0 for deterministic rows.
    pub mcse: f64,
    /// Retained draws behind the value; 0 for deterministic rows.
    pub n_samples: usize,
    /// Base seed the row was produced under.
    pub seed: u64,
}

/// Sort rows by (model_label, estimator, omega) — the emission order.
pub fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| {
        (a.model_label.as_str(), a.estimator.as_str())
            .cmp(&(b.model_label.as_str(), b.estimator.as_str()))
            .then(a.omega.total_cmp(&b.omega))
    });
}

fn total_divergences(chains: &[ChainSamples]) -> usize {
    chains.iter().map(|c| c.divergences).sum()
}

fn warn_divergences(label: &str, omega: Option<f64>, chains: &[ChainSamples]) {
    let divergences = total_divergences(chains);
    if divergences > 0 {
        match omega {
            Some(omega) => eprintln!(
                "warning: {divergences} divergent transitions for `{label}` at omega={omega:e}; \
                 the reported mcse already reflects the lost moves"
            ),
            None => eprintln!(
                "warning: {divergences} divergent transitions for `{label}` (limiting fit)"
            ),
        }
    }
}

/// Sample a linear-model posterior, starting from the conjugate fit of the
/// retained observations (where heavy-tailed posteriors concentrate).
pub fn sample_linear(
    model: &Model,
    target: FitTarget,
    opts: &SamplerOptions,
) -> Result<Vec<ChainSamples>> {
    let (shape, scale) = model
        .config()
        .prior
        .conjugate_shape_scale()
        .unwrap_or((2.0, 2.0));
    let retained = model.dataset().subset(&model.retained_indices())?;
    let fit = conjugate_fit(&retained, shape, scale)?;
    let init = fit.initial_point().to_flat();
    match target {
        FitTarget::Full => run_chains(&LinearPosterior(model), &init, opts),
        FitTarget::Limiting => run_chains(&LinearLimitingPosterior(model), &init, opts),
    }
}

/// Sample a positive-response posterior from its log-scale least-squares
/// start.
pub fn sample_glm(
    model: &GlmModel,
    target: FitTarget,
    opts: &SamplerOptions,
) -> Result<Vec<ChainSamples>> {
    let init: Vec<f64> = model.initial_beta().iter().copied().collect();
    match target {
        FitTarget::Full => run_chains(&GlmPosterior(model), &init, opts),
        FitTarget::Limiting => run_chains(&GlmLimitingPosterior(model), &init, opts),
    }
}

/// Summarize the tracked coefficient: the slope when there is one.
fn tracked_coordinate(p: usize) -> usize {
    if p >= 2 {
        1
    } else {
        0
    }
}

fn coefficient_summary(chains: &[ChainSamples], coord: usize) -> Result<ScalarSummary> {
    scalar_summary(chains, |draw| draw[coord])
}

/// Run the linear-model sweep.
pub fn sweep_run(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let dataset = config.dataset.load()?;
    let omegas = config.omega_grid.values()?;
    let seed = config.sampler.seed;
    let mut records = Vec::new();
    for entry in &config.models {
        let model = Model::new(entry.config.clone(), dataset.clone())?;
        let coord = tracked_coordinate(model.dataset().p());
        let conjugate_closed_form = matches!(
            model.density().tail_class(),
            TailClass::ExponentialTail
        ) && model.config().prior.conjugate_shape_scale().is_some();

        for &omega in &omegas {
            let displaced = model.displaced(omega)?;
            let record = if conjugate_closed_form {
                let (shape, scale) = model
                    .config()
                    .prior
                    .conjugate_shape_scale()
                    .expect("checked above");
                let fit = conjugate_fit(displaced.dataset(), shape, scale)?;
                SweepRecord {
                    omega,
                    model_label: entry.label.clone(),
                    estimator: Estimator::PosteriorMeanBeta2,
                    value: fit.beta_hat()[coord],
                    mcse: 0.0,
                    n_samples: 0,
                    seed,
                }
            } else {
                let chains = sample_linear(&displaced, FitTarget::Full, &config.sampler)?;
                warn_divergences(&entry.label, Some(omega), &chains);
                let summary = coefficient_summary(&chains, coord)?;
                SweepRecord {
                    omega,
                    model_label: entry.label.clone(),
                    estimator: Estimator::PosteriorMeanBeta2,
                    value: summary.mean,
                    mcse: summary.mcse,
                    n_samples: summary.n_samples,
                    seed,
                }
            };
            records.push(record);
        }

        if model.has_limiting_posterior() {
            let chains = sample_linear(&model, FitTarget::Limiting, &config.sampler)?;
            warn_divergences(&entry.label, None, &chains);
            let summary = coefficient_summary(&chains, coord)?;
            for &omega in &omegas {
                records.push(SweepRecord {
                    omega,
                    model_label: entry.label.clone(),
                    estimator: Estimator::LimitingMeanBeta2,
                    value: summary.mean,
                    mcse: summary.mcse,
                    n_samples: summary.n_samples,
                    seed,
                });
            }
        }

        if config.include_ratio {
            if model.has_limiting_posterior() {
                let settings = QuadratureSettings {
                    rel_tol: config.ratio_rel_tol,
                    ..QuadratureSettings::default()
                };
                for &omega in &omegas {
                    let ratio = theorem_ratio(&model, omega, &settings)?;
                    if !ratio.converged {
                        eprintln!(
                            "warning: ratio quadrature for `{}` at omega={omega:e} \
                             missed its tolerance",
                            entry.label
                        );
                    }
                    records.push(SweepRecord {
                        omega,
                        model_label: entry.label.clone(),
                        estimator: Estimator::TheoremRatio,
                        value: ratio.ratio,
                        mcse: 0.0,
                        n_samples: 0,
                        seed,
                    });
                }
            } else {
                eprintln!(
                    "warning: `{}` has no limiting posterior; skipping ratio rows",
                    entry.label
                );
            }
        }
    }
    sort_records(&mut records);
    Ok(records)
}

/// Run the positive-response sweep. The limiting posterior always exists
/// here (it is exactly the posterior of the retained observations), so
/// every model gets both estimators.
pub fn glm_sweep_run(config: &GlmSweepConfig) -> Result<Vec<SweepRecord>> {
    let dataset = config.dataset.load()?;
    let omegas = config.omega_grid.values()?;
    let seed = config.sampler.seed;
    let mut records = Vec::new();
    for entry in &config.models {
        let model = GlmModel::new(entry.config.clone(), dataset.clone())?;
        let coord = tracked_coordinate(model.dataset().p());
        for &omega in &omegas {
            let displaced = model.displaced(omega)?;
            let chains = sample_glm(&displaced, FitTarget::Full, &config.sampler)?;
            warn_divergences(&entry.label, Some(omega), &chains);
            let summary = coefficient_summary(&chains, coord)?;
            records.push(SweepRecord {
                omega,
                model_label: entry.label.clone(),
                estimator: Estimator::PosteriorMeanBeta2,
                value: summary.mean,
                mcse: summary.mcse,
                n_samples: summary.n_samples,
                seed,
            });
        }
        let chains = sample_glm(&model, FitTarget::Limiting, &config.sampler)?;
        warn_divergences(&entry.label, None, &chains);
        let summary = coefficient_summary(&chains, coord)?;
        for &omega in &omegas {
            records.push(SweepRecord {
                omega,
                model_label: entry.label.clone(),
                estimator: Estimator::LimitingMeanBeta2,
                value: summary.mean,
                mcse: summary.mcse,
                n_samples: summary.n_samples,
                seed,
            });
        }
    }
    sort_records(&mut records);
    Ok(records)
}

const CSV_HEADER: [&str; 7] = [
    "omega",
    "model_label",
    "estimator",
    "value",
    "mcse",
    "n_samples",
    "seed",
];

/// Write records as CSV. Rows are sorted before emission; floats are
/// printed with 17 significant digits so parsing them back is lossless.
///
/// # Errors
///
/// Refuses an empty record set before creating the file; I/O and
/// serialization problems carry the path.
pub fn emit_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    let display = path.display().to_string();
    if records.is_empty() {
        return Err(Error::csv(display, "refusing to write an empty record set"));
    }
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::csv(&display, e.to_string()))?;
    writer
        .write_record(CSV_HEADER)
        .map_err(|e| Error::csv(&display, e.to_string()))?;
    for r in &sorted {
        writer
            .write_record([
                format!("{:.16e}", r.omega),
                r.model_label.clone(),
                r.estimator.to_string(),
                format!("{:.16e}", r.value),
                format!("{:.16e}", r.mcse),
                r.n_samples.to_string(),
                r.seed.to_string(),
            ])
            .map_err(|e| Error::csv(&display, e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| Error::csv(&display, e.to_string()))?;
    Ok(())
}

/// Parse a sweep CSV back into records (inverse of [`emit_csv`]).
pub fn read_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| Error::csv(&display, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::csv(&display, e.to_string()))?;
    if headers != CSV_HEADER.as_slice() {
        return Err(Error::csv(
            display,
            format!("unexpected header {headers:?}"),
        ));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(&display, e.to_string()))?;
        let field = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| Error::csv(&display, format!("row too short: {row:?}")))
        };
        let parse_f64 = |i: usize| -> Result<f64> {
            field(i)?
                .parse::<f64>()
                .map_err(|e| Error::csv(&display, format!("bad float in column {i}: {e}")))
        };
        records.push(SweepRecord {
            omega: parse_f64(0)?,
            model_label: field(1)?.to_string(),
            estimator: field(2)?.parse()?,
            value: parse_f64(3)?,
            mcse: parse_f64(4)?,
            n_samples: field(5)?
                .parse()
                .map_err(|e| Error::csv(&display, format!("bad count: {e}")))?,
            seed: field(6)?
                .parse()
                .map_err(|e| Error::csv(&display, format!("bad seed: {e}")))?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DatasetSource, OmegaGrid};
    use heavytail::model::{ErrorSpec, ModelConfig, Outlier, PriorSpec};

    fn small_sampler(seed: u64) -> SamplerOptions {
        SamplerOptions {
            chains: 2,
            draws: 300,
            warmup: 200,
            n_leapfrog: 12,
            seed,
            ..SamplerOptions::default()
        }
    }

    fn conjugate_prior() -> PriorSpec {
        PriorSpec::ConjugateNormalInvGamma {
            shape: 2.0,
            scale: 2.0,
        }
    }

    fn last_row_outlier(n: usize) -> Vec<Outlier> {
        vec![Outlier {
            index: n - 1,
            rate: 1.0,
            direction: Default::default(),
        }]
    }

    fn sweep_config(models: Vec<crate::config::SweepModel>) -> SweepConfig {
        SweepConfig {
            dataset: DatasetSource::SimulateLinear { n: 10, seed: 3 },
            models,
            omega_grid: OmegaGrid::Explicit {
                values: vec![0.0, 100.0, 10_000.0],
            },
            sampler: small_sampler(42),
            include_ratio: false,
            ratio_rel_tol: 1e-7,
        }
    }

    #[test]
    fn normal_rows_are_exact_and_have_no_limiting_fit() {
        let config = sweep_config(vec![crate::config::SweepModel {
            label: "normal".into(),
            config: ModelConfig {
                error: ErrorSpec::Normal,
                prior: conjugate_prior(),
                outliers: last_row_outlier(10),
            },
        }]);
        let records = sweep_run(&config).unwrap();
        assert_eq!(records.len(), 3);
        for r in &records {
            assert_eq!(r.estimator, Estimator::PosteriorMeanBeta2);
            assert_eq!(r.mcse, 0.0);
            assert_eq!(r.n_samples, 0);
        }
        // The closed-form mean is dragged monotonically by the outlier.
        assert!(records[0].value < records[1].value);
        assert!(records[1].value < records[2].value);
    }

    #[test]
    fn heavy_tailed_rows_carry_limiting_estimates() {
        let config = sweep_config(vec![crate::config::SweepModel {
            label: "student_t_nu4".into(),
            config: ModelConfig {
                error: ErrorSpec::StudentT { nu: 4.0 },
                prior: conjugate_prior(),
                outliers: last_row_outlier(10),
            },
        }]);
        let records = sweep_run(&config).unwrap();
        assert_eq!(records.len(), 6);
        let limiting: Vec<&SweepRecord> = records
            .iter()
            .filter(|r| r.estimator == Estimator::LimitingMeanBeta2)
            .collect();
        assert_eq!(limiting.len(), 3);
        // One fit replicated across the grid.
        assert!(limiting.iter().all(|r| r.value == limiting[0].value));
        assert!(limiting.iter().all(|r| r.n_samples == 600));
        // Sorted by (label, estimator, omega).
        let mut resorted = records.clone();
        sort_records(&mut resorted);
        assert_eq!(records, resorted);
    }

    #[test]
    fn past_breakdown_models_skip_the_limiting_estimator() {
        let config = sweep_config(vec![crate::config::SweepModel {
            label: "student_t_nu10_three_outliers".into(),
            config: ModelConfig {
                error: ErrorSpec::StudentT { nu: 10.0 },
                prior: conjugate_prior(),
                outliers: vec![
                    Outlier {
                        index: 7,
                        rate: 1.0,
                        direction: Default::default(),
                    },
                    Outlier {
                        index: 8,
                        rate: 1.0,
                        direction: Default::default(),
                    },
                    Outlier {
                        index: 9,
                        rate: 1.0,
                        direction: Default::default(),
                    },
                ],
            },
        }]);
        let records = sweep_run(&config).unwrap();
        assert!(records
            .iter()
            .all(|r| r.estimator == Estimator::PosteriorMeanBeta2));
    }

    #[test]
    fn sweeps_are_seed_deterministic() {
        let make = |seed: u64| {
            let config = sweep_config(vec![crate::config::SweepModel {
                label: "student_t_nu4".into(),
                config: ModelConfig {
                    error: ErrorSpec::StudentT { nu: 4.0 },
                    prior: conjugate_prior(),
                    outliers: last_row_outlier(10),
                },
            }]);
            let config = SweepConfig {
                sampler: small_sampler(seed),
                ..config
            };
            sweep_run(&config).unwrap()
        };
        assert_eq!(make(42), make(42));
        assert_ne!(make(42), make(43));
    }

    #[test]
    fn glm_sweep_tracks_both_estimators() {
        let config = GlmSweepConfig {
            dataset: DatasetSource::SimulateGlm { n: 12, seed: 9 },
            models: vec![crate::config::GlmSweepModel {
                label: "robust_gamma_2_1".into(),
                config: heavytail::model::GlmConfig {
                    nu: 2.0,
                    c: 1.0,
                    prior: heavytail::model::CoefficientPrior::Normal { sd: 10.0 },
                    outliers: last_row_outlier(12),
                },
            }],
            omega_grid: OmegaGrid::Explicit {
                values: vec![10.0, 1000.0],
            },
            sampler: small_sampler(7),
        };
        let records = glm_sweep_run(&config).unwrap();
        assert_eq!(records.len(), 4);
        assert_eq!(
            records
                .iter()
                .filter(|r| r.estimator == Estimator::LimitingMeanBeta2)
                .count(),
            2
        );
        for r in &records {
            assert!(r.value.is_finite());
            assert!(r.mcse > 0.0);
        }
    }

    #[test]
    fn csv_round_trips_and_is_byte_deterministic() {
        let records = vec![
            SweepRecord {
                omega: 100.0,
                model_label: "b,comma".into(),
                estimator: Estimator::PosteriorMeanBeta2,
                value: 1.25e-3,
                mcse: 2.5e-5,
                n_samples: 1200,
                seed: 42,
            },
            SweepRecord {
                omega: 1.0,
                model_label: "a".into(),
                estimator: Estimator::TheoremRatio,
                value: 0.999_999,
                mcse: 0.0,
                n_samples: 0,
                seed: 42,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path_a = dir.path().join("a.csv");
        let path_b = dir.path().join("b.csv");
        emit_csv(&records, &path_a).unwrap();
        emit_csv(&records, &path_b).unwrap();
        let bytes_a = std::fs::read(&path_a).unwrap();
        let bytes_b = std::fs::read(&path_b).unwrap();
        assert_eq!(bytes_a, bytes_b);
        // LF endings, no carriage returns anywhere.
        assert!(!bytes_a.contains(&b'\r'));
        let text = String::from_utf8(bytes_a).unwrap();
        assert!(text.starts_with("omega,model_label,estimator,value,mcse,n_samples,seed\n"));
        // The comma-bearing label is quoted per RFC 4180.
        assert!(text.contains("\"b,comma\""));

        let mut expected = records.clone();
        sort_records(&mut expected);
        let back = read_csv(&path_a).unwrap();
        assert_eq!(back, expected);
    }

    #[test]
    fn empty_record_sets_produce_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        assert!(matches!(
            emit_csv(&[], &path),
            Err(Error::Csv { .. })
        ));
        assert!(!path.exists());
    }
}

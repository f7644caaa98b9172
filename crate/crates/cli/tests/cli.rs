//! End-to-end subcommand tests driving the compiled binary, plus the
//! structural contrast between whole and partial robustness: a
//! log-Pareto-tailed error law's limiting posterior IS the posterior of
//! the retained observations, while a power-tailed law's limiting
//! posterior keeps a scale trace of the removed outliers.

use std::path::Path;
use std::process::Command;

use nalgebra::DVector;

use heavytail::conjugate::conjugate_fit;
use heavytail::model::{
    Dataset, Direction, ErrorSpec, Model, ModelConfig, Outlier, ParameterPoint, PriorSpec,
};
use heavytail::sampler::SamplerOptions;
use heavytail_cli::config::FitTarget;
use heavytail_cli::sweep::sample_linear;

fn heavytail(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_heavytail"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

#[test]
fn simulate_writes_a_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    let out = dir.path().join("data.csv");
    write(&config, r#"{"kind": "simulate_linear", "n": 15, "seed": 3}"#);
    let run = heavytail(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{run:?}");
    let data = Dataset::from_csv_path(&out).unwrap();
    assert_eq!((data.n(), data.p()), (15, 2));
    assert_eq!(data.y(), Dataset::simulate_linear(15, 3).unwrap().y());
}

#[test]
fn conjugate_subcommand_matches_the_library_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("conj.json");
    let out = dir.path().join("report.json");
    write(
        &config,
        r#"{"dataset": {"kind": "simulate_linear", "n": 10, "seed": 5},
            "shape": 2.0, "scale": 2.0}"#,
    );
    let run = heavytail(&[
        "conjugate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{run:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let fit = conjugate_fit(&Dataset::simulate_linear(10, 5).unwrap(), 2.0, 2.0).unwrap();
    assert_eq!(report["beta_hat"][1].as_f64().unwrap(), fit.beta_hat()[1]);
    assert_eq!(
        report["log_marginal"].as_f64().unwrap(),
        fit.log_marginal()
    );
}

#[test]
fn breakdown_subcommand_reports_the_refined_margin() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("breakdown.json");
    write(
        &config,
        r#"{"error": {"family": "student_t", "nu": 10.0},
            "n": 20, "outlier_count": 2, "conjugate_shape": 2.0}"#,
    );
    let run = heavytail(&["breakdown", "--config", config.to_str().unwrap()]);
    assert!(run.status.success(), "{run:?}");
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["moment_margin"].as_f64().unwrap(), 1.0);
    assert!(!report["condition_holds"].as_bool().unwrap());
    assert_eq!(report["breakdown_fraction"].as_f64().unwrap(), 1.0 / 11.0);
}

#[test]
fn diagnostics_subcommand_passes_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verdicts.json");
    let run = heavytail(&["diagnostics", "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{run:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["all_passed"].as_bool().unwrap());
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.lines().filter(|l| l.starts_with("pass ")).count() >= 12);
}

const SMALL_SWEEP: &str = r#"{
    "dataset": {"kind": "simulate_linear", "n": 10, "seed": 20250101},
    "models": [{"label": "student_t_nu4", "config": {
        "error": {"family": "student_t", "nu": 4.0},
        "prior": {"family": "conjugate_normal_inv_gamma", "shape": 2.0, "scale": 2.0},
        "outliers": [{"index": 9, "rate": 1.0}]}}],
    "omega_grid": {"kind": "explicit", "values": [10.0, 1000.0]},
    "sampler": {"chains": 2, "draws": 300, "warmup": 200, "n_leapfrog": 12,
                "target_accept": 0.8, "seed": 20250101}
}"#;

#[test]
fn seed_flag_rerandomizes_and_fixed_seeds_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    write(&config, SMALL_SWEEP);
    let run_with = |seed: &str, out: &Path| {
        let run = heavytail(&[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(run.status.success(), "{run:?}");
        std::fs::read(out).unwrap()
    };
    let a = run_with("1", &dir.path().join("a.csv"));
    let b = run_with("1", &dir.path().join("b.csv"));
    let c = run_with("2", &dir.path().join("c.csv"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn csv_commands_require_an_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    write(&config, SMALL_SWEEP);
    let run = heavytail(&["sweep", "--config", config.to_str().unwrap()]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("--out"));
}

#[test]
fn malformed_configs_fail_with_the_path_in_context() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("fit.json");
    write(&config, r#"{"model": {"error": {"family": "student_t"}}}"#);
    let run = heavytail(&["fit", "--config", config.to_str().unwrap()]);
    assert!(!run.status.success());
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("fit.json"), "stderr: {stderr}");
}

fn conjugate_prior() -> PriorSpec {
    PriorSpec::ConjugateNormalInvGamma {
        shape: 2.0,
        scale: 2.0,
    }
}

fn probe_points() -> Vec<ParameterPoint> {
    vec![
        ParameterPoint {
            beta: DVector::from_column_slice(&[0.5, 1.2]),
            gamma: 0.3,
        },
        ParameterPoint {
            beta: DVector::from_column_slice(&[-1.0, 2.0]),
            gamma: -0.7,
        },
        ParameterPoint {
            beta: DVector::from_column_slice(&[2.0, 0.9]),
            gamma: 1.1,
        },
    ]
}

/// Whole robustness: the log-Pareto-tailed limiting posterior carries no
/// trace of the outliers at all, so fitting it is bit-for-bit the same as
/// fitting the retained observations directly.
#[test]
fn lptn_limiting_fit_is_exactly_the_retained_subset_fit() {
    let data = Dataset::simulate_linear(12, 7).unwrap();
    let full = Model::new(
        ModelConfig {
            error: ErrorSpec::Lptn { rho: 0.95 },
            prior: conjugate_prior(),
            outliers: vec![Outlier {
                index: 11,
                rate: 1.0,
                direction: Direction::Large,
            }],
        },
        data.clone(),
    )
    .unwrap();
    let subset = Model::new(
        ModelConfig {
            error: ErrorSpec::Lptn { rho: 0.95 },
            prior: conjugate_prior(),
            outliers: vec![],
        },
        data.subset(&full.retained_indices()).unwrap(),
    )
    .unwrap();

    for pt in probe_points() {
        assert_eq!(
            full.log_limiting_posterior(&pt).unwrap(),
            subset.log_posterior(&pt).unwrap()
        );
    }

    let opts = SamplerOptions {
        chains: 2,
        draws: 400,
        warmup: 300,
        n_leapfrog: 12,
        seed: 11,
        ..SamplerOptions::default()
    };
    let limiting = sample_linear(&full, FitTarget::Limiting, &opts).unwrap();
    let direct = sample_linear(&subset, FitTarget::Full, &opts).unwrap();
    for (a, b) in limiting.iter().zip(&direct) {
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.divergences, b.divergences);
    }
}

/// Partial robustness: the power-tailed limiting posterior differs from
/// the retained-subset posterior by exactly the `(α|O|/2)·γ` scale trace.
#[test]
fn student_limiting_target_keeps_the_scale_trace() {
    let data = Dataset::simulate_linear(12, 7).unwrap();
    let nu = 4.0;
    let full = Model::new(
        ModelConfig {
            error: ErrorSpec::StudentT { nu },
            prior: conjugate_prior(),
            outliers: vec![
                Outlier {
                    index: 10,
                    rate: 1.0,
                    direction: Direction::Large,
                },
                Outlier {
                    index: 11,
                    rate: 1.0,
                    direction: Direction::Large,
                },
            ],
        },
        data.clone(),
    )
    .unwrap();
    let subset = Model::new(
        ModelConfig {
            error: ErrorSpec::StudentT { nu },
            prior: conjugate_prior(),
            outliers: vec![],
        },
        data.subset(&full.retained_indices()).unwrap(),
    )
    .unwrap();
    let trace = 0.5 * nu * 2.0;
    for pt in probe_points() {
        let lhs = full.log_limiting_posterior(&pt).unwrap();
        let rhs = subset.log_posterior(&pt).unwrap() + trace * pt.gamma;
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
    }
}

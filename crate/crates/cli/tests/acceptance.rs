//! Acceptance gate: one test per release criterion, each printing a
//! `[PASS]`/`[FAIL]` line (visible with `--nocapture`) in addition to the
//! usual per-test verdict. The criteria mix exact closed-form oracles
//! (conjugate posterior, analytic identities) with ordering properties of
//! the sampled sweeps, so they hold under any seed while still pinning
//! the quantitative contracts.

use std::time::Instant;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use heavytail::conjugate::conjugate_fit;
use heavytail::density::ErrorDensity;
use heavytail::marginal::{theorem_ratio, QuadratureSettings};
use heavytail::model::{
    breakdown_check, Dataset, Direction, ErrorSpec, Model, ModelConfig, Outlier, ParameterPoint,
    PriorSpec,
};
use heavytail::sampler::{scalar_summary, SamplerOptions, ScalarSummary};

use heavytail_cli::config::{DatasetSource, FitTarget, OmegaGrid, SweepConfig, SweepModel};
use heavytail_cli::diagnostics;
use heavytail_cli::sweep::{sample_linear, sweep_run, Estimator, SweepRecord};

const SEED: u64 = 20_250_101;

fn dataset() -> Dataset {
    Dataset::simulate_linear(20, SEED).unwrap()
}

fn conjugate_prior() -> PriorSpec {
    PriorSpec::ConjugateNormalInvGamma {
        shape: 2.0,
        scale: 2.0,
    }
}

fn tail_outliers(count: usize) -> Vec<Outlier> {
    (20 - count..20)
        .map(|index| Outlier {
            index,
            rate: 1.0,
            direction: Direction::Large,
        })
        .collect()
}

fn model(error: ErrorSpec, outliers: Vec<Outlier>) -> Model {
    Model::new(
        ModelConfig {
            error,
            prior: conjugate_prior(),
            outliers,
        },
        dataset(),
    )
    .unwrap()
}

fn sampler() -> SamplerOptions {
    SamplerOptions {
        seed: SEED,
        ..SamplerOptions::default()
    }
}

/// Posterior mean of the slope with its MCSE at a given displacement.
fn slope_at(model: &Model, omega: f64, target: FitTarget) -> ScalarSummary {
    let displaced = model.displaced(omega).unwrap();
    let chains = sample_linear(&displaced, target, &sampler()).unwrap();
    scalar_summary(&chains, |draw| draw[1]).unwrap()
}

fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "[{}] {criterion}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "{criterion}: {detail}");
}

#[test]
fn acceptance_01_hmc_matches_conjugate_closed_form() {
    let start = Instant::now();
    let data = dataset();
    let model = model(ErrorSpec::Normal, vec![]);
    let chains = sample_linear(&model, FitTarget::Full, &sampler()).unwrap();
    let exact = conjugate_fit(&data, 2.0, 2.0).unwrap();

    let mut detail = String::new();
    let mut ok = true;
    for (name, summary, target) in [
        (
            "beta1",
            scalar_summary(&chains, |d| d[0]).unwrap(),
            exact.beta_hat()[0],
        ),
        (
            "beta2",
            scalar_summary(&chains, |d| d[1]).unwrap(),
            exact.beta_hat()[1],
        ),
        (
            "sigma2",
            scalar_summary(&chains, |d| d[2].exp()).unwrap(),
            exact.sigma2_mean().unwrap(),
        ),
    ] {
        let err = (summary.mean - target).abs();
        ok &= err < 3.0 * summary.mcse;
        detail.push_str(&format!(
            "{name} |{:.6} - {:.6}| = {err:.2e} vs 3·mcse = {:.2e}; ",
            summary.mean,
            target,
            3.0 * summary.mcse
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed.as_secs() < 60;
    detail.push_str(&format!("elapsed {:.1}s", elapsed.as_secs_f64()));
    report("criterion 1 (conjugate-oracle equivalence)", ok, &detail);
}

#[test]
fn acceptance_02_marginal_ratio_reaches_its_limit() {
    let start = Instant::now();
    let x = nalgebra::DMatrix::from_column_slice(6, 1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let y = DVector::from_column_slice(&[1.1, 1.9, 3.2, 3.8, 5.1, 5.9]);
    let data = Dataset::new(x, y).unwrap();
    let model = Model::new(
        ModelConfig {
            error: ErrorSpec::StudentT { nu: 4.0 },
            prior: conjugate_prior(),
            outliers: vec![Outlier {
                index: 5,
                rate: 1.0,
                direction: Direction::Large,
            }],
        },
        data,
    )
    .unwrap();
    let settings = QuadratureSettings {
        rel_tol: 1e-7,
        ..QuadratureSettings::default()
    };
    let far = theorem_ratio(&model, 1e6, &settings).unwrap();
    let near = theorem_ratio(&model, 1e3, &settings).unwrap();
    let elapsed = start.elapsed();

    let in_band = far.ratio >= 0.95 && far.ratio <= 1.05;
    let improves = (far.ratio - 1.0).abs() < (near.ratio - 1.0).abs();
    let in_time = elapsed.as_secs() < 300;
    report(
        "criterion 2 (marginal ratio limit)",
        in_band && improves && in_time && far.converged && near.converged,
        &format!(
            "ratio(1e6) = {:.6}, ratio(1e3) = {:.6}, elapsed {:.1}s",
            far.ratio,
            near.ratio,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn acceptance_03_sweep_stabilizes_at_the_limiting_mean() {
    let mut detail = String::new();
    let mut ok = true;

    // Student-t models: displaced mean vs the ω-free limiting fit.
    let mut limiting_means = Vec::new();
    for nu in [4.0, 10.0] {
        let m = model(ErrorSpec::StudentT { nu }, tail_outliers(1));
        let displaced = slope_at(&m, 1e4, FitTarget::Full);
        let limiting = slope_at(&m, 0.0, FitTarget::Limiting);
        let err = (displaced.mean - limiting.mean).abs();
        let budget = 3.0 * (displaced.mcse.powi(2) + limiting.mcse.powi(2)).sqrt();
        ok &= err < budget;
        detail.push_str(&format!(
            "nu={nu}: |{:.5} - {:.5}| = {err:.2e} vs {budget:.2e}; ",
            displaced.mean, limiting.mean
        ));
        limiting_means.push(limiting.mean);
    }

    // Normal model: exact closed form, dragged without bound.
    let config = SweepConfig {
        dataset: DatasetSource::SimulateLinear { n: 20, seed: SEED },
        models: vec![SweepModel {
            label: "normal".into(),
            config: ModelConfig {
                error: ErrorSpec::Normal,
                prior: conjugate_prior(),
                outliers: tail_outliers(1),
            },
        }],
        omega_grid: OmegaGrid::Log {
            lo: 1.0,
            hi: 1e4,
            points: 17,
        },
        sampler: sampler(),
        include_ratio: false,
        ratio_rel_tol: 1e-7,
    };
    let records: Vec<SweepRecord> = sweep_run(&config).unwrap();
    let normal: Vec<&SweepRecord> = records
        .iter()
        .filter(|r| r.estimator == Estimator::PosteriorMeanBeta2)
        .collect();
    ok &= normal.len() == 17;
    ok &= normal.windows(2).all(|w| w[1].value > w[0].value);
    let last = normal.last().unwrap().value;
    for &lim in &limiting_means {
        ok &= last >= 2.0 * lim;
    }
    detail.push_str(&format!(
        "normal slope rises {:.3} → {:.3} over 17 ω, final ≥ 2× limiting means ({:.3}, {:.3})",
        normal[0].value, last, limiting_means[0], limiting_means[1]
    ));
    report("criterion 3 (stabilization vs unbounded drift)", ok, &detail);
}

#[test]
fn acceptance_04_breakdown_beyond_the_admissible_outlier_fraction() {
    let mut detail = String::new();
    let mut ok = true;

    // |O| = 3 with ν = 10 and n = 20 breaks down: the mean blows up.
    let broken = model(ErrorSpec::StudentT { nu: 10.0 }, tail_outliers(3));
    assert!(!broken.has_limiting_posterior());
    let at_zero = slope_at(&broken, 0.0, FitTarget::Full);
    let at_far = slope_at(&broken, 1e4, FitTarget::Full);
    ok &= at_far.mean >= 5.0 * at_zero.mean;
    detail.push_str(&format!(
        "|O|=3: mean {:.3} → {:.3} (≥5×); ",
        at_zero.mean, at_far.mean
    ));

    // |O| = 2 sits exactly on the refined margin: still drifting at ω=1e4.
    let marginal_case = model(ErrorSpec::StudentT { nu: 10.0 }, tail_outliers(2));
    assert!(!marginal_case.has_limiting_posterior());
    let mid = slope_at(&marginal_case, 1e2, FitTarget::Full);
    let far = slope_at(&marginal_case, 1e4, FitTarget::Full);
    let movement = (far.mean - mid.mean).abs();
    let noise = 3.0 * (far.mcse.powi(2) + mid.mcse.powi(2)).sqrt();
    ok &= movement > noise;
    detail.push_str(&format!(
        "|O|=2 still moves {movement:.2e} > {noise:.2e} between 1e2 and 1e4; "
    ));

    // Refined moment margins, reported exactly.
    let tail = ErrorDensity::student_t(10.0).unwrap().tail_class();
    let two = breakdown_check(&tail, 20, 2, Some(2.0)).unwrap();
    let three = breakdown_check(&tail, 20, 3, Some(2.0)).unwrap();
    ok &= two.moment_margin == Some(1.0);
    ok &= three.moment_margin == Some(-4.5);
    detail.push_str(&format!(
        "margins: |O|=2 → {:?}, |O|=3 → {:?}",
        two.moment_margin, three.moment_margin
    ));

    // |O| = 1, ν = 4 stabilizes: its ω = 1e4 mean sits on the limiting one.
    let robust = model(ErrorSpec::StudentT { nu: 4.0 }, tail_outliers(1));
    let far = slope_at(&robust, 1e4, FitTarget::Full);
    let limit = slope_at(&robust, 0.0, FitTarget::Limiting);
    let movement = (far.mean - limit.mean).abs();
    let noise = 3.0 * (far.mcse.powi(2) + limit.mcse.powi(2)).sqrt();
    ok &= movement < noise;
    detail.push_str(&format!(
        "; |O|=1 at its limit: {movement:.2e} < {noise:.2e}"
    ));
    report("criterion 4 (breakdown replication)", ok, &detail);
}

fn assert_verdicts(criterion: &str, report_names: &[&str]) {
    let suite = diagnostics::run_all().unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for name in report_names {
        let v = suite
            .verdicts
            .iter()
            .find(|v| v.name == *name)
            .unwrap_or_else(|| panic!("missing diagnostic {name}"));
        ok &= v.passed;
        detail.push_str(&format!(
            "{name}: {:.2e} ≤ {:.0e}; ",
            v.achieved, v.tolerance
        ));
    }
    report(criterion, ok, &detail);
}

#[test]
fn acceptance_05_density_identities() {
    assert_verdicts(
        "criterion 5 (density identities)",
        &[
            "normalization_lptn95",
            "normalization_robust_gamma_2_1",
            "lptn_tail_mass_identity",
            "robust_gamma_right_tail_mass",
            "robust_gamma_left_tail_mass",
            "lptn_branch_continuity",
            "robust_gamma_branch_continuity",
        ],
    );
}

#[test]
fn acceptance_06_limit_ratios_on_their_grids() {
    assert_verdicts(
        "criterion 6 (limit propositions)",
        &[
            "student_t4_limit_ratio_grid",
            "lptn95_limit_ratio_grid",
            "robust_gamma_limit_ratio",
        ],
    );
}

#[test]
fn acceptance_07_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for error in [
        ErrorSpec::Normal,
        ErrorSpec::StudentT { nu: 4.0 },
        ErrorSpec::Lptn { rho: 0.95 },
    ] {
        let m = model(error.clone(), vec![]);
        let mut accepted = 0;
        while accepted < 50 {
            let pt = ParameterPoint {
                beta: DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0)),
                gamma: rng.random_range(-2.0..2.0),
            };
            // Keep LPTN draws away from the splice kink, where one-sided
            // derivatives differ.
            if let ErrorDensity::Lptn(p) = m.density() {
                let inv_sigma = (-0.5 * pt.gamma).exp();
                let data = m.dataset();
                let near_kink = (0..data.n()).any(|i| {
                    let u = (data.y()[i] - data.predictor(i, &pt.beta)) * inv_sigma;
                    (u.abs() - p.theta()).abs() < 1e-2
                });
                if near_kink {
                    continue;
                }
            }
            accepted += 1;
            let grad = m.grad_log_posterior(&pt).unwrap();
            let flat_grad = [grad.beta[0], grad.beta[1], grad.gamma];
            for (c, &analytic) in flat_grad.iter().enumerate() {
                let x = if c < 2 { pt.beta[c] } else { pt.gamma };
                let h = 1e-5 * x.abs().max(1.0);
                let mut up = pt.clone();
                let mut dn = pt.clone();
                if c < 2 {
                    up.beta[c] += h;
                    dn.beta[c] -= h;
                } else {
                    up.gamma += h;
                    dn.gamma -= h;
                }
                let fd = (m.log_posterior(&up).unwrap() - m.log_posterior(&dn).unwrap())
                    / (2.0 * h);
                let rel = (fd - analytic).abs() / analytic.abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    report(
        "criterion 7 (gradient correctness)",
        worst <= 1e-6,
        &format!("max relative FD error {worst:.2e} over 3 models × 50 points × 3 coords"),
    );
}

#[test]
fn acceptance_08_tail_and_profile_bounds() {
    assert_verdicts(
        "criterion 8 (bound suite)",
        &[
            "gaussian_survival_bound",
            "decay_sequence_student_t4",
            "decay_sequence_lptn95",
            "scale_profile_mode_location",
            "scale_profile_ceiling",
        ],
    );
}

#[test]
fn acceptance_09_sweep_output_is_byte_deterministic() {
    let config_json = r#"{
        "dataset": {"kind": "simulate_linear", "n": 12, "seed": 20250101},
        "models": [
            {"label": "student_t_nu4", "config": {
                "error": {"family": "student_t", "nu": 4.0},
                "prior": {"family": "conjugate_normal_inv_gamma", "shape": 2.0, "scale": 2.0},
                "outliers": [{"index": 11, "rate": 1.0}]}},
            {"label": "normal", "config": {
                "error": {"family": "normal"},
                "prior": {"family": "conjugate_normal_inv_gamma", "shape": 2.0, "scale": 2.0},
                "outliers": [{"index": 11, "rate": 1.0}]}}
        ],
        "omega_grid": {"kind": "explicit", "values": [1.0, 100.0, 10000.0]},
        "sampler": {"chains": 2, "draws": 500, "warmup": 400, "n_leapfrog": 16,
                    "target_accept": 0.8, "seed": 20250101}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("sweep.json");
    std::fs::write(&config_path, config_json).unwrap();
    let run = |out: &std::path::Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_heavytail"))
            .args(["sweep", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let first = run(&dir.path().join("a.csv"));
    let second = run(&dir.path().join("b.csv"));
    report(
        "criterion 9 (byte-deterministic sweep)",
        first == second && !first.is_empty(),
        &format!("two runs, {} bytes each, identical", first.len()),
    );
}

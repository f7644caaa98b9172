//! Release-gate property suite: every analytic identity the densities and
//! asymptotics are built on, checked numerically and reported with the
//! tolerance that was achieved.
//!
//! Each check produces a [`Verdict`] rather than an error, so a failing
//! identity shows up as a readable report entry instead of an abort. The
//! suite covers:
//!
//! * normalization — every density integrates to 1;
//! * splice consistency — tail masses equal the central-law masses they
//!   replace, and the density value is continuous across each branch
//!   point (probed at machine-adjacent floats);
//! * asymptotic ratios — the location-scale and multiplicative limit
//!   ratios sit near 1 at extreme observations, on grids chosen inside
//!   each family's convergence horizon (log-tailed laws converge only
//!   logarithmically, so their scale grids hug 1);
//! * tail and profile bounds — the Gaussian survival bound, the decay of
//!   the displaced-marginal envelope, and the scale-profile ceiling for
//!   positive responses.

use std::path::Path;

use serde::{Deserialize, Serialize};

use heavytail::density::{ErrorDensity, RobustGammaDensity};
use heavytail::marginal::{decay_sequence, gaussian_tail_bound_check, scale_profile_mode};
use heavytail::special::{reg_gamma_lower, reg_gamma_upper};
use heavytail::{Error, Result};

/// Outcome of a single property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Stable identifier of the check.
    pub name: String,
    /// Whether `achieved <= tolerance` (and any side conditions) held.
    pub passed: bool,
    /// Worst error observed across the check's grid.
    pub achieved: f64,
    /// Budget the check is held to.
    pub tolerance: f64,
    /// Human-readable account of what was measured.
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, achieved: f64, tolerance: f64, detail: String) -> Self {
        Verdict {
            name: name.to_string(),
            passed: achieved.is_finite() && achieved <= tolerance,
            achieved,
            tolerance,
            detail,
        }
    }
}

/// Full suite outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub verdicts: Vec<Verdict>,
    pub all_passed: bool,
}

/// Adjacent floats below and above `x` (finite, nonzero).
fn ulp_neighbors(x: f64) -> (f64, f64) {
    if x > 0.0 {
        (f64::from_bits(x.to_bits() - 1), f64::from_bits(x.to_bits() + 1))
    } else {
        (f64::from_bits(x.to_bits() + 1), f64::from_bits(x.to_bits() - 1))
    }
}

/// Largest relative jump of `f` across the three adjacent floats straddling
/// `x`. A discontinuity of relative size δ reports ≈ δ; a continuous branch
/// switch reports O(slope · ulp) ≈ 1e-16.
fn continuity_gap(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let (lo, hi) = ulp_neighbors(x);
    let (fl, fm, fh) = (f(lo), f(x), f(hi));
    let scale = fm.abs().max(1e-300);
    ((fl - fm).abs()).max((fh - fm).abs()) / scale
}

fn normalization_checks(verdicts: &mut Vec<Verdict>) -> Result<()> {
    let cases: [(&str, f64); 4] = [
        ("normalization_normal", ErrorDensity::normal().normalization_integral()?),
        ("normalization_student_t4", ErrorDensity::student_t(4.0)?.normalization_integral()?),
        ("normalization_lptn95", ErrorDensity::lptn(0.95)?.normalization_integral()?),
        (
            "normalization_robust_gamma_2_1",
            RobustGammaDensity::new(2.0, 1.0)?.normalization_integral()?,
        ),
    ];
    for (name, integral) in cases {
        verdicts.push(Verdict::new(
            name,
            (integral - 1.0).abs(),
            1e-6,
            format!("density integrates to {integral:.12}"),
        ));
    }
    Ok(())
}

fn tail_mass_checks(verdicts: &mut Vec<Verdict>) -> Result<()> {
    let ErrorDensity::Lptn(lptn) = ErrorDensity::lptn(0.95)? else {
        unreachable!("lptn constructor yields the lptn variant");
    };
    let target = 0.5 * (1.0 - lptn.rho());
    verdicts.push(Verdict::new(
        "lptn_tail_mass_identity",
        (lptn.tail_mass() - target).abs(),
        1e-10,
        format!(
            "one-sided tail mass {:.16} vs (1-rho)/2 = {target:.16}",
            lptn.tail_mass()
        ),
    ));

    let g = RobustGammaDensity::new(2.0, 1.0)?;
    let right_target = reg_gamma_upper(g.nu(), g.nu() * g.z_r())?;
    verdicts.push(Verdict::new(
        "robust_gamma_right_tail_mass",
        (g.right_tail_mass() - right_target).abs(),
        1e-10,
        format!(
            "spliced mass {:.16} vs gamma survival {right_target:.16} past z_r = {:.6}",
            g.right_tail_mass(),
            g.z_r()
        ),
    ));
    let left_mass = g
        .left_tail_mass()
        .ok_or_else(|| Error::Configuration("nu=2, c=1 must carry a left tail".into()))?;
    let left_target = reg_gamma_lower(g.nu(), g.nu() * g.z_l())?;
    verdicts.push(Verdict::new(
        "robust_gamma_left_tail_mass",
        (left_mass - left_target).abs(),
        1e-10,
        format!(
            "spliced mass {left_mass:.16} vs gamma mass {left_target:.16} below z_l = {:.6}",
            g.z_l()
        ),
    ));
    Ok(())
}

fn continuity_checks(verdicts: &mut Vec<Verdict>) -> Result<()> {
    let lptn = ErrorDensity::lptn(0.95)?;
    let ErrorDensity::Lptn(p) = lptn else {
        unreachable!("lptn constructor yields the lptn variant");
    };
    let gap_pos = continuity_gap(|y| lptn.pdf(y), p.theta());
    let gap_neg = continuity_gap(|y| lptn.pdf(y), -p.theta());
    verdicts.push(Verdict::new(
        "lptn_branch_continuity",
        gap_pos.max(gap_neg),
        1e-12,
        format!(
            "relative density jump across machine-adjacent floats at ±θ = ±{:.6}",
            p.theta()
        ),
    ));

    let g = RobustGammaDensity::new(2.0, 1.0)?;
    let pdf = |z: f64| g.ln_pdf(z).map_or(f64::NAN, f64::exp);
    let gap_r = continuity_gap(pdf, g.z_r());
    let gap_l = continuity_gap(pdf, g.z_l());
    verdicts.push(Verdict::new(
        "robust_gamma_branch_continuity",
        gap_r.max(gap_l),
        1e-12,
        format!(
            "relative density jump at z_l = {:.6} and z_r = {:.6}",
            g.z_l(),
            g.z_r()
        ),
    ));
    Ok(())
}

/// The location-scale limit ratio over a (scale, linear-predictor) grid at
/// |y| = 1e8. Scale grids differ by family: power tails converge
/// polynomially, log tails only logarithmically, so the latter's grid
/// stays within a fraction of a percent of 1.
fn limit_ratio_checks(verdicts: &mut Vec<Verdict>) -> Result<()> {
    let x_betas = [-2.0, 0.0, 3.0];
    let ys = [1e8, -1e8];

    let cases: [(&str, ErrorDensity, &[f64]); 2] = [
        (
            "student_t4_limit_ratio_grid",
            ErrorDensity::student_t(4.0)?,
            &[0.5, 1.0, 2.0],
        ),
        (
            "lptn95_limit_ratio_grid",
            ErrorDensity::lptn(0.95)?,
            &[0.998, 1.0, 1.002],
        ),
    ];
    for (name, density, sigmas) in cases {
        let mut worst = 0.0f64;
        for &sigma in sigmas {
            for &x_beta in &x_betas {
                for &y in &ys {
                    let ratio = density.limit_ratio_location_scale(x_beta, sigma, y)?;
                    worst = worst.max((ratio - 1.0).abs());
                }
            }
        }
        verdicts.push(Verdict::new(
            name,
            worst,
            1e-3,
            format!(
                "max |ratio - 1| over scales {sigmas:?}, predictors {x_betas:?}, |y| = 1e8"
            ),
        ));
    }

    let g = RobustGammaDensity::new(2.0, 1.0)?;
    let mut worst = 0.0f64;
    for ln_mu in [-0.004f64, 0.004] {
        for y in [1e8, 1e-8] {
            let ratio = g.glm_limit_ratio(ln_mu.exp(), y)?;
            worst = worst.max((ratio - 1.0).abs());
        }
    }
    verdicts.push(Verdict::new(
        "robust_gamma_limit_ratio",
        worst,
        1e-3,
        "max |ratio - 1| for means e^±0.004 at y = 1e8 and y = 1e-8".to_string(),
    ));
    Ok(())
}

fn tail_bound_check(verdicts: &mut Vec<Verdict>) -> Result<()> {
    let sigma0 = 1.3;
    let grid: Vec<f64> = (0..60)
        .map(|i| 0.1 * sigma0 * 100.0f64.powf(i as f64 / 59.0))
        .collect();
    let report = gaussian_tail_bound_check(sigma0, &grid)?;
    let worst = report
        .points
        .iter()
        .map(|p| p.survival / p.bound)
        .fold(0.0f64, f64::max);
    let mut v = Verdict::new(
        "gaussian_survival_bound",
        worst,
        1.0,
        format!(
            "max survival/bound ratio over 60 thresholds in [0.1σ₀, 10σ₀], σ₀ = {sigma0}"
        ),
    );
    v.passed = v.passed && report.all_hold;
    verdicts.push(v);
    Ok(())
}

fn decay_checks(verdicts: &mut Vec<Verdict>) -> Result<()> {
    let grid = [1e2, 1e4, 1e6];

    let student = ErrorDensity::student_t(4.0)?.tail_class();
    let values = decay_sequence(&student, 20, &[1.0], &grid)?;
    let mut v = Verdict::new(
        "decay_sequence_student_t4",
        values[2] / values[0],
        1e-6,
        format!("envelope falls {:.3e} → {:.3e} over ω ∈ [1e2, 1e6]", values[0], values[2]),
    );
    v.passed = v.passed && values.windows(2).all(|w| w[1] < w[0]);
    verdicts.push(v);

    let lptn = ErrorDensity::lptn(0.95)?.tail_class();
    let values = decay_sequence(&lptn, 20, &[1.0, 1.0], &grid)?;
    let mut v = Verdict::new(
        "decay_sequence_lptn95",
        values[2] / values[0],
        1e-6,
        format!("envelope falls {:.3e} → {:.3e} over ω ∈ [1e2, 1e6]", values[0], values[2]),
    );
    v.passed = v.passed && values.windows(2).all(|w| w[1] < w[0]);
    verdicts.push(v);
    Ok(())
}

fn profile_checks(verdicts: &mut Vec<Verdict>) -> Result<()> {
    let g = RobustGammaDensity::new(2.0, 1.0)?;
    let mut worst_mode = 0.0f64;
    let mut worst_bound = 0.0f64;
    for y in [0.3, 7.0] {
        let report = scale_profile_mode(&g, y)?;
        worst_mode = worst_mode.max((report.mode - y).abs() / y);
        worst_bound = worst_bound.max((report.max_value / report.bound - 1.0).abs());
    }
    verdicts.push(Verdict::new(
        "scale_profile_mode_location",
        worst_mode,
        1e-6,
        "relative distance of the profile peak from μ = y at y ∈ {0.3, 7}".to_string(),
    ));
    verdicts.push(Verdict::new(
        "scale_profile_ceiling",
        worst_bound,
        1e-8,
        "relative gap between the numeric peak and (ν/e)^ν/(yΓ(ν))".to_string(),
    ));
    Ok(())
}

/// Run the full suite.
///
/// # Errors
///
/// Only construction or evaluation failures surface as errors; identity
/// violations are reported as failed verdicts.
pub fn run_all() -> Result<DiagnosticsReport> {
    let mut verdicts = Vec::new();
    normalization_checks(&mut verdicts)?;
    tail_mass_checks(&mut verdicts)?;
    continuity_checks(&mut verdicts)?;
    limit_ratio_checks(&mut verdicts)?;
    tail_bound_check(&mut verdicts)?;
    decay_checks(&mut verdicts)?;
    profile_checks(&mut verdicts)?;
    let all_passed = verdicts.iter().all(|v| v.passed);
    Ok(DiagnosticsReport {
        verdicts,
        all_passed,
    })
}

/// Write a report as pretty-printed JSON.
///
/// # Errors
///
/// I/O and serialization errors carry the path.
pub fn emit_json(report: &DiagnosticsReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::csv(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

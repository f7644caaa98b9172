//! Deterministic quadrature of marginal likelihoods and limit diagnostics.
//!
//! For models with at most two coefficients the marginal likelihood
//!
//! ```text
//! m(y) = ∬ exp{ln π(β, γ) + ln L(β, γ; y)} dβ dγ
//! ```
//!
//! is computed by nested adaptive Gauss–Kronrod quadrature, either for the
//! full posterior or for the limiting posterior (retained observations plus
//! the `σ^{α|O|}` trace term). The headline check is [`theorem_ratio`]:
//! as the designated outliers drift out along their displacement paths,
//!
//! ```text
//! m_ω(y) / [ m_limiting · ∏_{i∈O} f(y_i(ω)) ]  →  1.
//! ```
//!
//! Integration windows come from conjugate Normal-model fits: each β
//! coordinate spans the fitted mean ±12 posterior standard deviations
//! (union over the full-data and retained-subset fits), and γ spans
//! `[-14, 14]` — σ between about 9e−4 and 1.1e3 — widened further if a
//! conjugate window falls outside. A ladder of split points at one-sd
//! spacing seeds the adaptive subdivision so that a spike much narrower
//! than the window cannot slip between panels: with a far-displaced
//! outlier, the full-data fit is dragged far from the retained fit, yet
//! the heavy-tailed posterior keeps almost all its mass near the latter.
//! All integration happens after subtracting the largest candidate
//! log-density (log-shift), so only ratios to the peak are exponentiated.
//!
//! The module also evaluates the supporting inequalities used to justify
//! the limit: the decay sequence `ω^{-n} ∏_{i∈O} f_tail(2 b_i ω)^{-1}`,
//! the Gaussian survival bound `P(Z ≥ t) ≤ (2π)^{-1/2} (σ₀/t) e^{-t²/2σ₀²}`,
//! and the profile `μ ↦ (1/μ) f_{ν,c}(y/μ)`, which is maximized at `μ = y`
//! with value `(ν/e)^ν / (y Γ(ν))`.

use std::cell::RefCell;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::conjugate::{conjugate_fit, ConjugatePosterior};
use crate::density::{RobustGammaDensity, TailClass};
use crate::model::{Model, ParameterPoint};
use crate::quad::{adaptive_quadrature, QuadOptions};
use crate::special::{log_gamma, normal_sf, FRAC_1_SQRT_2PI};
use crate::{Error, Result};

/// Which normalizing constant to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalMode {
    /// Marginal likelihood of the model's current data.
    Full,
    /// Normalizing constant of the limiting posterior: retained
    /// observations only, times the tail trace `σ^{α|O|}`.
    Limiting,
}

/// Budget for one marginal integration.
#[derive(Debug, Clone)]
pub struct QuadratureSettings {
    /// Relative tolerance on the marginal value.
    pub rel_tol: f64,
    /// Subinterval budget per integration level.
    pub max_intervals: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            rel_tol: 1e-7,
            max_intervals: 2000,
        }
    }
}

/// A marginal-likelihood estimate on the log scale.
#[derive(Debug, Clone, Copy)]
pub struct MarginalEstimate {
    /// Natural log of the estimated marginal.
    pub log_value: f64,
    /// Achieved relative error estimate (outer plus worst inner level).
    pub rel_error: f64,
    /// Whether every integration level met the requested tolerance; when
    /// `false` the estimate is still returned with its achieved error.
    pub converged: bool,
    /// Posterior-density evaluations spent.
    pub evaluations: usize,
}

/// Numerator, denominator, and value of the marginal-ratio limit check.
#[derive(Debug, Clone, Copy)]
pub struct RatioEstimate {
    /// `m_ω(y) / [m_limiting · ∏_{i∈O} f(y_i(ω))]`.
    pub ratio: f64,
    /// Log of the ratio (the primitive actually computed).
    pub log_ratio: f64,
    /// Log marginal of the displaced data.
    pub log_marginal_full: f64,
    /// Log normalizing constant of the limiting posterior.
    pub log_marginal_limiting: f64,
    /// `Σ_{i∈O} ln f(y_i(ω))` at the displaced responses.
    pub log_outlier_density: f64,
    /// Both quadratures met their tolerance.
    pub converged: bool,
}

/// One abscissa of the Gaussian survival-bound sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBoundPoint {
    pub t: f64,
    /// `P(Z ≥ t)` for `Z ~ N(0, σ₀²)`.
    pub survival: f64,
    /// `(2π)^{-1/2} (σ₀/t) exp(-t²/(2σ₀²))`.
    pub bound: f64,
    /// `survival ≤ bound` at this point.
    pub holds: bool,
}

/// Result of sweeping the Gaussian survival bound over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub sigma0: f64,
    pub points: Vec<TailBoundPoint>,
    /// Bound holds at every grid point.
    pub all_hold: bool,
}

/// Mode and maximum of the scale profile `μ ↦ (1/μ) f_{ν,c}(y/μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleProfileReport {
    pub y: f64,
    /// Numerically located maximizer (expected: `μ = y`).
    pub mode: f64,
    /// Profile value at the located mode.
    pub max_value: f64,
    /// Closed-form ceiling `(ν/e)^ν / (y Γ(ν))`.
    pub bound: f64,
}

/// Per-coordinate integration window: bounds plus interior split points.
struct Window {
    lo: f64,
    hi: f64,
    hints: Vec<f64>,
}

/// Ladder of split points at one-sd spacing around a center.
fn ladder(center: f64, sd: f64, into: &mut Vec<f64>) {
    for j in -12i32..=12 {
        into.push(center + f64::from(j) * sd);
    }
}

fn beta_window(fits: &[&ConjugatePosterior], coord: usize) -> Window {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut hints = Vec::new();
    for fit in fits {
        let center = fit.beta_hat()[coord];
        let sd = fit.beta_window_sds()[coord];
        lo = lo.min(center - 12.0 * sd);
        hi = hi.max(center + 12.0 * sd);
        ladder(center, sd, &mut hints);
    }
    Window { lo, hi, hints }
}

fn gamma_window(fits: &[&ConjugatePosterior]) -> Window {
    let mut lo = -14.0f64;
    let mut hi = 14.0f64;
    let mut hints = Vec::new();
    for fit in fits {
        let center = fit.gamma_center();
        let sd = fit.gamma_sd();
        lo = lo.min(center - 12.0 * sd);
        hi = hi.max(center + 12.0 * sd);
        ladder(center, sd, &mut hints);
    }
    Window { lo, hi, hints }
}

/// Shared mutable bookkeeping for one nested integration.
struct NestedState {
    evaluations: usize,
    inner_converged: bool,
    max_inner_rel: f64,
    failure: Option<Error>,
}

/// Log-density over `(beta, gamma)`, boxed so integrators can capture either
/// posterior family behind one signature.
type LnTarget<'a> = Box<dyn Fn(&[f64], f64) -> f64 + 'a>;

struct NestedIntegrator<'a> {
    ln_target: LnTarget<'a>,
    beta_windows: Vec<Window>,
    gamma: Window,
    shift: f64,
    beta_opts: QuadOptions,
    gamma_opts: QuadOptions,
    state: RefCell<NestedState>,
}

impl NestedIntegrator<'_> {
    /// Integrate over the remaining coordinates given a fixed β prefix.
    /// Failures are latched into the shared state (the integrand contract
    /// of the quadrature routine is a plain `f64`).
    fn level(&self, prefix: &[f64]) -> f64 {
        if self.state.borrow().failure.is_some() {
            return 0.0;
        }
        if prefix.len() == self.beta_windows.len() {
            let integrand = |g: f64| {
                let v = (self.ln_target)(prefix, g);
                if v.is_finite() {
                    (v - self.shift).exp()
                } else {
                    0.0
                }
            };
            match adaptive_quadrature(integrand, self.gamma.lo, self.gamma.hi, &self.gamma_opts) {
                Ok(r) => {
                    let mut st = self.state.borrow_mut();
                    st.evaluations += r.evaluations;
                    st.inner_converged &= r.converged;
                    if r.value > 0.0 {
                        st.max_inner_rel = st.max_inner_rel.max(r.error_estimate / r.value);
                    }
                    r.value
                }
                Err(e) => {
                    self.state.borrow_mut().failure.get_or_insert(e);
                    0.0
                }
            }
        } else {
            let window = &self.beta_windows[prefix.len()];
            let integrand = |b: f64| {
                let mut coords = prefix.to_vec();
                coords.push(b);
                self.level(&coords)
            };
            match adaptive_quadrature(integrand, window.lo, window.hi, &self.beta_opts) {
                Ok(r) => {
                    let mut st = self.state.borrow_mut();
                    st.inner_converged &= r.converged;
                    if r.value > 0.0 {
                        st.max_inner_rel = st.max_inner_rel.max(r.error_estimate / r.value);
                    }
                    r.value
                }
                Err(e) => {
                    self.state.borrow_mut().failure.get_or_insert(e);
                    0.0
                }
            }
        }
    }
}

/// Integrate the model's (full or limiting) unnormalized posterior over
/// `(β, γ)` and return the marginal on the log scale.
///
/// # Errors
///
/// Dimension error for `p > 2`; configuration/tail errors from the
/// limiting construction; numeric errors if the integrand misbehaves.
/// A missed tolerance is *not* an error: the estimate is returned with
/// `converged = false` and the achieved `rel_error`.
pub fn marginal_quadrature(
    model: &Model,
    mode: MarginalMode,
    settings: &QuadratureSettings,
) -> Result<MarginalEstimate> {
    let p = model.dataset().p();
    if p > 2 {
        return Err(Error::Dimension(format!(
            "quadrature marginals support at most two coefficients, got {p}"
        )));
    }
    if mode == MarginalMode::Limiting {
        // Surface non-integrable or exponential-tail configurations now.
        let probe = ParameterPoint {
            beta: DVector::zeros(p),
            gamma: 0.0,
        };
        model.log_limiting_posterior(&probe)?;
    }

    let (shape, scale) = model
        .config()
        .prior
        .conjugate_shape_scale()
        .unwrap_or((2.0, 2.0));
    let fit_full = conjugate_fit(model.dataset(), shape, scale)?;
    let retained = model.retained_indices();
    let fit_retained = conjugate_fit(&model.dataset().subset(&retained)?, shape, scale)?;
    let fits: Vec<&ConjugatePosterior> = match mode {
        MarginalMode::Full => vec![&fit_full, &fit_retained],
        MarginalMode::Limiting => vec![&fit_retained],
    };

    let ln_target = move |beta: &[f64], gamma: f64| -> f64 {
        let point = ParameterPoint {
            beta: DVector::from_column_slice(beta),
            gamma,
        };
        let value = match mode {
            MarginalMode::Full => model.log_posterior(&point),
            MarginalMode::Limiting => model.log_limiting_posterior(&point),
        };
        value.unwrap_or(f64::NEG_INFINITY)
    };

    // Log-shift at the best conjugate center so the integrand peaks near 1.
    let shift = fits
        .iter()
        .map(|fit| {
            let center = fit.initial_point();
            ln_target(center.beta.as_slice(), center.gamma)
        })
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::Numeric(
            "posterior is not finite at any conjugate center".into(),
        ));
    }

    let integrator = NestedIntegrator {
        ln_target: Box::new(ln_target),
        beta_windows: (0..p).map(|j| beta_window(&fits, j)).collect(),
        gamma: gamma_window(&fits),
        shift,
        beta_opts: QuadOptions {
            rel_tol: settings.rel_tol,
            max_intervals: settings.max_intervals,
            split_points: Vec::new(),
        },
        gamma_opts: QuadOptions {
            rel_tol: 0.1 * settings.rel_tol,
            max_intervals: settings.max_intervals,
            split_points: Vec::new(),
        },
        state: RefCell::new(NestedState {
            evaluations: 0,
            inner_converged: true,
            max_inner_rel: 0.0,
            failure: None,
        }),
    };
    // Wire each level's ladder into its own options.
    let mut integrator = integrator;
    integrator.gamma_opts.split_points = integrator.gamma.hints.clone();

    let outer = if p == 0 {
        // Degenerate: no coefficients, a single γ integral.
        let r = adaptive_quadrature(
            |g| {
                let v = (integrator.ln_target)(&[], g);
                if v.is_finite() {
                    (v - integrator.shift).exp()
                } else {
                    0.0
                }
            },
            integrator.gamma.lo,
            integrator.gamma.hi,
            &integrator.gamma_opts,
        )?;
        integrator.state.borrow_mut().evaluations += r.evaluations;
        r
    } else {
        let window = &integrator.beta_windows[0];
        let mut opts = integrator.beta_opts.clone();
        opts.split_points = window.hints.clone();
        // The second β coordinate (when present) uses its own ladder.
        if p == 2 {
            integrator.beta_opts.split_points = integrator.beta_windows[1].hints.clone();
        }
        adaptive_quadrature(|b| integrator.level(&[b]), window.lo, window.hi, &opts)?
    };

    let state = integrator.state.into_inner();
    if let Some(e) = state.failure {
        return Err(e);
    }
    if !(outer.value > 0.0) {
        return Err(Error::Numeric(format!(
            "marginal quadrature collapsed to {} (log-shift {shift})",
            outer.value
        )));
    }
    let rel_error = outer.error_estimate / outer.value + state.max_inner_rel;
    Ok(MarginalEstimate {
        log_value: shift + outer.value.ln(),
        rel_error,
        converged: outer.converged && state.inner_converged,
        evaluations: state.evaluations,
    })
}

/// Ratio `m_ω(y) / [m_limiting · ∏_{i∈O} f(y_i(ω))]`, which approaches 1
/// as the outliers drift out. Computed fully in log space; both marginals
/// use the same window policy.
///
/// # Errors
///
/// Configuration error when the outlier fraction violates the tail
/// condition; tail-class error for normal errors; quadrature errors
/// propagate.
pub fn theorem_ratio(
    model: &Model,
    omega: f64,
    settings: &QuadratureSettings,
) -> Result<RatioEstimate> {
    let report = model.breakdown_report()?;
    if !report.condition_holds {
        return Err(Error::Configuration(format!(
            "outlier fraction {:.3} exceeds what the tail can absorb \
             (breakdown fraction {:.3})",
            report.outlier_fraction, report.breakdown_fraction
        )));
    }
    let displaced = model.displaced(omega)?;
    let full = marginal_quadrature(&displaced, MarginalMode::Full, settings)?;
    let limiting = marginal_quadrature(model, MarginalMode::Limiting, settings)?;
    let log_outlier_density: f64 = model
        .outlier_indices()
        .iter()
        .map(|&i| model.density().ln_pdf(displaced.dataset().y()[i]))
        .sum();
    let log_ratio = full.log_value - limiting.log_value - log_outlier_density;
    Ok(RatioEstimate {
        ratio: log_ratio.exp(),
        log_ratio,
        log_marginal_full: full.log_value,
        log_marginal_limiting: limiting.log_value,
        log_outlier_density,
        converged: full.converged && limiting.converged,
    })
}

/// Evaluate the decay sequence `ω^{-n} ∏_{i∈O} f_tail(2 b_i ω)^{-1}` on a
/// grid, using the asymptotic tail form of the given class. Under the
/// admissible outlier fraction the sequence falls to 0 (order
/// `ω^{α|O|+|O|-n}` for power tails); past breakdown it grows instead.
///
/// # Errors
///
/// Tail-class error for exponential tails; domain error for non-positive
/// grid points or slopes, or (log tails) arguments `2bω ≤ 1` where the
/// tail form is undefined.
pub fn decay_sequence(
    tail: &TailClass,
    n: usize,
    slopes: &[f64],
    omega_grid: &[f64],
) -> Result<Vec<f64>> {
    let alpha = tail
        .alpha()
        .ok_or_else(|| Error::TailClass("decay sequence needs heavy tails".into()))?;
    let c_f = tail
        .c_f()
        .ok_or_else(|| Error::TailClass("decay sequence needs heavy tails".into()))?;
    if slopes.is_empty() || slopes.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return Err(Error::Domain(
            "outlier slopes must be positive and finite".into(),
        ));
    }
    let log_tail = |z: f64| -> Result<f64> {
        match tail {
            TailClass::RegularlyVarying { .. } => Ok(c_f.ln() - (alpha + 1.0) * z.ln()),
            TailClass::LogRegularlyVarying { .. } => {
                if z <= 1.0 {
                    return Err(Error::Domain(format!(
                        "log-tail form needs arguments above 1, got {z}"
                    )));
                }
                Ok(c_f.ln() - z.ln() - (alpha + 1.0) * z.ln().ln())
            }
            TailClass::ExponentialTail => unreachable!("rejected above"),
        }
    };
    omega_grid
        .iter()
        .map(|&omega| {
            if !(omega > 0.0) || !omega.is_finite() {
                return Err(Error::Domain(format!(
                    "decay sequence needs positive finite ω, got {omega}"
                )));
            }
            let mut log_value = -(n as f64) * omega.ln();
            for &b in slopes {
                log_value -= log_tail(2.0 * b * omega)?;
            }
            Ok(log_value.exp())
        })
        .collect()
}

/// Check `P(Z_{σ₀} ≥ t) ≤ (2π)^{-1/2} (σ₀/t) exp(-t²/(2σ₀²))` over a grid
/// of positive thresholds.
///
/// # Errors
///
/// Domain error for non-positive `σ₀` or grid points.
pub fn gaussian_tail_bound_check(sigma0: f64, t_grid: &[f64]) -> Result<TailBoundReport> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(Error::Domain(format!(
            "scale must be positive and finite, got {sigma0}"
        )));
    }
    let points = t_grid
        .iter()
        .map(|&t| {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Domain(format!(
                    "thresholds must be positive and finite, got {t}"
                )));
            }
            let z = t / sigma0;
            let survival = normal_sf(z);
            let bound = FRAC_1_SQRT_2PI / z * (-0.5 * z * z).exp();
            Ok(TailBoundPoint {
                t,
                survival,
                bound,
                holds: survival <= bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_hold = points.iter().all(|p| p.holds);
    Ok(TailBoundReport {
        sigma0,
        points,
        all_hold,
    })
}

/// Locate the maximum of `μ ↦ (1/μ) f_{ν,c}(y/μ)` by golden-section search
/// on `ln μ` and report it against the closed-form ceiling
/// `(ν/e)^ν / (y Γ(ν))` attained at `μ = y`.
///
/// # Errors
///
/// Domain error for `y ≤ 0`.
pub fn scale_profile_mode(density: &RobustGammaDensity, y: f64) -> Result<ScaleProfileReport> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!(
            "profile point must be positive and finite, got {y}"
        )));
    }
    let objective = |ln_mu: f64| -> f64 {
        density
            .ln_scaled_pdf(y, ln_mu.exp())
            .unwrap_or(f64::NEG_INFINITY)
    };
    // Golden-section search over a window certain to contain the peak.
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut a = y.ln() - 30.0;
    let mut b = y.ln() + 30.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
        if b - a < 1e-13 {
            break;
        }
    }
    let ln_mode = 0.5 * (a + b);
    let nu = density.nu();
    let bound = (nu * (nu.ln() - 1.0) - y.ln() - log_gamma(nu)?).exp();
    Ok(ScaleProfileReport {
        y,
        mode: ln_mode.exp(),
        max_value: objective(ln_mode).exp(),
        bound,
    })
}

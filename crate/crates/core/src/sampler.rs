//! Hamiltonian Monte Carlo with step-size and mass adaptation.
//!
//! The sampler integrates Hamiltonian dynamics for a differentiable
//! unnormalized log-density `ln π`:
//!
//! ```text
//! H(x, p) = -ln π(x) + ½ pᵀ M⁻¹ p
//! ```
//!
//! using the leapfrog scheme with a diagonal mass matrix `M`, and accepts
//! proposals by a Metropolis correction on the energy error. Warmup runs in
//! two windows: the first adapts the step size by dual averaging under a
//! unit mass; the second re-adapts after estimating `M⁻¹` from the
//! first-window variances. Trajectory lengths are jittered ±20% around the
//! configured number of leapfrog steps to avoid resonances.
//!
//! Chains are fully deterministic given the base seed — chain `k` uses seed
//! `base + k` — and running them in parallel threads produces bitwise the
//! same draws as running them one after another. A transition whose energy
//! error exceeds [`DIVERGENCE_THRESHOLD`] (or turns non-finite) is counted
//! as a divergence and rejected.
//!
//! Effective sample sizes use the initial-positive-sequence estimator: sum
//! paired autocovariances `c_{2m} + c_{2m+1}` until the pair turns negative.
//! Monte Carlo standard errors are `sd/√ESS` with per-chain ESS summed.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::{GlmModel, Model, ParameterPoint};
use crate::{Error, Result};

/// Energy error beyond which a transition is recorded as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// A differentiable unnormalized log-density over `ℝ^dim`.
pub trait Target: Sync {
    /// Number of coordinates.
    fn dim(&self) -> usize;

    /// Log-density and gradient at `x`. Implementations should return
    /// `-∞` (with any gradient) for out-of-support points rather than an
    /// error; errors abort sampling.
    fn log_density_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Full linear-model posterior over the flat coordinates `[β…, γ]`.
pub struct LinearPosterior<'a>(pub &'a Model);

/// Limiting linear-model posterior (outliers removed, tail factor kept).
pub struct LinearLimitingPosterior<'a>(pub &'a Model);

/// Positive-response posterior over `β`.
pub struct GlmPosterior<'a>(pub &'a GlmModel);

/// Limiting positive-response posterior.
pub struct GlmLimitingPosterior<'a>(pub &'a GlmModel);

fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

fn off_support(dim: usize) -> (f64, Vec<f64>) {
    (f64::NEG_INFINITY, vec![0.0; dim])
}

impl Target for LinearPosterior<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn log_density_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if !all_finite(x) {
            return Ok(off_support(self.dim()));
        }
        let pt = ParameterPoint::from_flat(x)?;
        let lp = self.0.log_posterior(&pt)?;
        let grad = self.0.grad_log_posterior(&pt)?;
        Ok((lp, grad.to_flat()))
    }
}

impl Target for LinearLimitingPosterior<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn log_density_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if !all_finite(x) {
            return Ok(off_support(self.dim()));
        }
        let pt = ParameterPoint::from_flat(x)?;
        let lp = self.0.log_limiting_posterior(&pt)?;
        let grad = self.0.grad_log_limiting_posterior(&pt)?;
        Ok((lp, grad.to_flat()))
    }
}

impl Target for GlmPosterior<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn log_density_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if !all_finite(x) {
            return Ok(off_support(self.dim()));
        }
        let beta = nalgebra::DVector::from_column_slice(x);
        let lp = self.0.log_posterior(&beta)?;
        let grad = self.0.grad_log_posterior(&beta)?;
        Ok((lp, grad.iter().copied().collect()))
    }
}

impl Target for GlmLimitingPosterior<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn log_density_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if !all_finite(x) {
            return Ok(off_support(self.dim()));
        }
        let beta = nalgebra::DVector::from_column_slice(x);
        let lp = self.0.log_limiting_posterior(&beta)?;
        let grad = self.0.grad_log_limiting_posterior(&beta)?;
        Ok((lp, grad.iter().copied().collect()))
    }
}

/// Sampler configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerOptions {
    /// Independent chains (seeded `seed`, `seed+1`, …).
    pub chains: usize,
    /// Retained draws per chain.
    pub draws: usize,
    /// Adaptation iterations per chain (discarded).
    pub warmup: usize,
    /// Base number of leapfrog steps (jittered ±20% per transition).
    pub n_leapfrog: usize,
    /// Dual-averaging acceptance target.
    pub target_accept: f64,
    /// Base seed.
    pub seed: u64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            chains: 4,
            draws: 5000,
            warmup: 2000,
            n_leapfrog: 32,
            target_accept: 0.8,
            seed: 20_250_101,
        }
    }
}

/// Output of one chain.
#[derive(Debug, Clone)]
pub struct ChainSamples {
    /// Retained positions, one inner vector per draw.
    pub draws: Vec<Vec<f64>>,
    /// Mean Metropolis acceptance probability over retained draws.
    pub accept_rate: f64,
    /// Divergent transitions over retained draws.
    pub divergences: usize,
    /// Step size after adaptation.
    pub step_size: f64,
    /// Estimated inverse mass (posterior variances) per coordinate.
    pub inv_mass: Vec<f64>,
    /// Seed this chain ran with.
    pub seed: u64,
}

/// Mean, spread, and Monte Carlo error of one scalar functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub mean: f64,
    pub sd: f64,
    /// `sd / √ESS`.
    pub mcse: f64,
    /// Effective sample size summed over chains.
    pub ess: f64,
    /// Total retained draws.
    pub n_samples: usize,
}

/// One leapfrog trajectory, updating position, momentum, gradient, and
/// log-density in place. `inv_mass` scales both the drift and the kinetic
/// energy.
// The argument list mirrors the integrator state; bundling it into a struct
// would force callers to move the buffers in and out every transition.
#[allow(clippy::too_many_arguments)]
pub fn leapfrog<T: Target + ?Sized>(
    target: &T,
    x: &mut [f64],
    p: &mut [f64],
    grad: &mut Vec<f64>,
    logp: &mut f64,
    step: f64,
    n_steps: usize,
    inv_mass: &[f64],
) -> Result<()> {
    let dim = x.len();
    for j in 0..dim {
        p[j] += 0.5 * step * grad[j];
    }
    for s in 0..n_steps {
        for j in 0..dim {
            x[j] += step * inv_mass[j] * p[j];
        }
        let (lp, g) = target.log_density_and_grad(x)?;
        *logp = lp;
        *grad = g;
        let weight = if s + 1 == n_steps { 0.5 } else { 1.0 };
        for j in 0..dim {
            p[j] += weight * step * grad[j];
        }
    }
    Ok(())
}

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p
        .iter()
        .zip(inv_mass)
        .map(|(pj, im)| pj * pj * im)
        .sum::<f64>()
}

fn draw_momentum(rng: &mut ChaCha8Rng, inv_mass: &[f64]) -> Vec<f64> {
    inv_mass
        .iter()
        .map(|im| {
            let z: f64 = rng.sample(StandardNormal);
            z / im.sqrt()
        })
        .collect()
}

/// Nesterov dual averaging of `ln ε` toward a target acceptance rate.
struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    m: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, delta: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            m: 0.0,
            delta,
        }
    }

    fn update(&mut self, alpha: f64) {
        self.m += 1.0;
        let eta = 1.0 / (self.m + Self::T0);
        self.h_bar += eta * (self.delta - alpha - self.h_bar);
        self.log_eps = self.mu - self.m.sqrt() / Self::GAMMA * self.h_bar;
        let w = self.m.powf(-Self::KAPPA);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
    }

    fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    fn averaged(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Crude initial step size: double or halve until a single leapfrog step
/// crosses 50% acceptance, à la the usual heuristic.
fn find_initial_step<T: Target + ?Sized>(
    target: &T,
    x0: &[f64],
    inv_mass: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let (logp0, grad0) = target.log_density_and_grad(x0)?;
    if !logp0.is_finite() {
        return Err(Error::Initialization(format!(
            "log-density is {logp0} at the initial point"
        )));
    }
    let p0 = draw_momentum(rng, inv_mass);
    let h0 = -logp0 + kinetic(&p0, inv_mass);
    let mut eps = 1.0;
    let trial = |eps: f64| -> Result<f64> {
        let mut x = x0.to_vec();
        let mut p = p0.clone();
        let mut grad = grad0.clone();
        let mut logp = logp0;
        leapfrog(target, &mut x, &mut p, &mut grad, &mut logp, eps, 1, inv_mass)?;
        let h1 = -logp + kinetic(&p, inv_mass);
        Ok((h0 - h1).exp())
    };
    let mut alpha = trial(eps)?;
    let go_up = alpha.is_finite() && alpha > 0.5;
    for _ in 0..60 {
        if go_up {
            if !(alpha.is_finite() && alpha > 0.5) || eps > 1e6 {
                break;
            }
            eps *= 2.0;
        } else {
            if alpha.is_finite() && alpha > 0.5 || eps < 1e-10 {
                break;
            }
            eps *= 0.5;
        }
        alpha = trial(eps)?;
    }
    Ok(eps.clamp(1e-10, 1e6))
}

struct ChainState {
    x: Vec<f64>,
    logp: f64,
    grad: Vec<f64>,
}

/// One Metropolis-adjusted trajectory; returns the acceptance probability
/// and whether the transition diverged.
fn transition<T: Target + ?Sized>(
    target: &T,
    state: &mut ChainState,
    step: f64,
    base_leapfrog: usize,
    inv_mass: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, bool)> {
    let lo = ((0.8 * base_leapfrog as f64).floor() as usize).max(1);
    let hi = ((1.2 * base_leapfrog as f64).ceil() as usize).max(lo);
    let n_steps = rng.random_range(lo..=hi);
    let p0 = draw_momentum(rng, inv_mass);
    let h0 = -state.logp + kinetic(&p0, inv_mass);
    let mut x = state.x.clone();
    let mut p = p0;
    let mut grad = state.grad.clone();
    let mut logp = state.logp;
    leapfrog(target, &mut x, &mut p, &mut grad, &mut logp, step, n_steps, inv_mass)?;
    let h1 = -logp + kinetic(&p, inv_mass);
    let delta_h = h1 - h0;
    if !delta_h.is_finite() || delta_h.abs() > DIVERGENCE_THRESHOLD {
        return Ok((0.0, true));
    }
    let alpha = (-delta_h).min(0.0).exp();
    if rng.random::<f64>() < alpha {
        state.x = x;
        state.logp = logp;
        state.grad = grad;
    }
    Ok((alpha, false))
}

fn adapt_window<T: Target + ?Sized>(
    target: &T,
    state: &mut ChainState,
    iterations: usize,
    opts: &SamplerOptions,
    inv_mass: &[f64],
    rng: &mut ChaCha8Rng,
    collect: bool,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let eps0 = find_initial_step(target, &state.x, inv_mass, rng)?;
    let mut da = DualAveraging::new(eps0, opts.target_accept);
    let mut kept = Vec::new();
    for it in 0..iterations {
        let (alpha, _) = transition(target, state, da.current(), opts.n_leapfrog, inv_mass, rng)?;
        da.update(alpha);
        if collect && 2 * it >= iterations {
            kept.push(state.x.clone());
        }
    }
    let eps = if iterations == 0 { eps0 } else { da.averaged() };
    Ok((eps.clamp(1e-10, 1e6), kept))
}

fn estimate_inv_mass(samples: &[Vec<f64>], dim: usize) -> Vec<f64> {
    if samples.len() < 10 {
        return vec![1.0; dim];
    }
    let n = samples.len() as f64;
    (0..dim)
        .map(|j| {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            var.max(1e-10)
        })
        .collect()
}

/// Run one chain: two-window warmup (step-size adaptation, then mass
/// estimation and re-adaptation), then `draws` retained transitions.
pub fn run_chain<T: Target + ?Sized>(
    target: &T,
    init: &[f64],
    opts: &SamplerOptions,
    chain_index: usize,
) -> Result<ChainSamples> {
    if init.len() != target.dim() {
        return Err(Error::Dimension(format!(
            "initial point has {} coordinates, target has {}",
            init.len(),
            target.dim()
        )));
    }
    let seed = opts.seed.wrapping_add(chain_index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (logp, grad) = target.log_density_and_grad(init)?;
    if !logp.is_finite() {
        return Err(Error::Initialization(format!(
            "log-density is {logp} at the initial point"
        )));
    }
    let mut state = ChainState {
        x: init.to_vec(),
        logp,
        grad,
    };
    let dim = target.dim();
    let mut inv_mass = vec![1.0; dim];

    let first = opts.warmup / 2;
    let second = opts.warmup - first;
    let (mut step, window_samples) =
        adapt_window(target, &mut state, first, opts, &inv_mass, &mut rng, true)?;
    if opts.warmup > 0 {
        inv_mass = estimate_inv_mass(&window_samples, dim);
        let (eps, _) =
            adapt_window(target, &mut state, second, opts, &inv_mass, &mut rng, false)?;
        step = eps;
    }

    let mut draws = Vec::with_capacity(opts.draws);
    let mut accept_sum = 0.0;
    let mut divergences = 0usize;
    for _ in 0..opts.draws {
        let (alpha, divergent) =
            transition(target, &mut state, step, opts.n_leapfrog, &inv_mass, &mut rng)?;
        accept_sum += alpha;
        if divergent {
            divergences += 1;
        }
        draws.push(state.x.clone());
    }
    Ok(ChainSamples {
        draws,
        accept_rate: if opts.draws == 0 {
            0.0
        } else {
            accept_sum / opts.draws as f64
        },
        divergences,
        step_size: step,
        inv_mass,
        seed,
    })
}

/// Run one chain at fixed settings, skipping adaptation entirely. Useful
/// for stress tests and for reproducing a tuned configuration exactly.
pub fn run_chain_fixed<T: Target + ?Sized>(
    target: &T,
    init: &[f64],
    step: f64,
    inv_mass: &[f64],
    n_leapfrog: usize,
    draws: usize,
    seed: u64,
) -> Result<ChainSamples> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Hyperparameter(format!(
            "step size must be positive, got {step}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (logp, grad) = target.log_density_and_grad(init)?;
    if !logp.is_finite() {
        return Err(Error::Initialization(format!(
            "log-density is {logp} at the initial point"
        )));
    }
    let mut state = ChainState {
        x: init.to_vec(),
        logp,
        grad,
    };
    let mut draws_out = Vec::with_capacity(draws);
    let mut accept_sum = 0.0;
    let mut divergences = 0usize;
    for _ in 0..draws {
        let (alpha, divergent) = transition(target, &mut state, step, n_leapfrog, inv_mass, &mut rng)?;
        accept_sum += alpha;
        if divergent {
            divergences += 1;
        }
        draws_out.push(state.x.clone());
    }
    Ok(ChainSamples {
        draws: draws_out,
        accept_rate: if draws == 0 { 0.0 } else { accept_sum / draws as f64 },
        divergences,
        step_size: step,
        inv_mass: inv_mass.to_vec(),
        seed,
    })
}

/// Run `opts.chains` chains in parallel threads. Chain `k` is seeded
/// `opts.seed + k`, so the result is bitwise identical to running the
/// chains sequentially.
pub fn run_chains<T: Target + Sync + ?Sized>(
    target: &T,
    init: &[f64],
    opts: &SamplerOptions,
) -> Result<Vec<ChainSamples>> {
    if opts.chains == 0 {
        return Err(Error::Configuration("need at least one chain".into()));
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..opts.chains)
            .map(|k| scope.spawn(move || run_chain(target, init, opts, k)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .map_err(|_| Error::Numeric("sampler thread panicked".into()))?
            })
            .collect()
    })
}

/// Effective sample size by the initial-positive-sequence estimator.
///
/// Returns `len` for uncorrelated input (up to noise) and less for
/// positively autocorrelated chains.
pub fn ess(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 4 {
        return n as f64;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let max_lag = (n - 1).min(2000);
    let autocov = |lag: usize| -> f64 {
        values[..n - lag]
            .iter()
            .zip(&values[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / nf
    };
    let c0 = autocov(0);
    if c0 <= 0.0 {
        return nf;
    }
    // τ = -1 + 2 Σ_m (c_{2m} + c_{2m+1})/c0 over the initial positive
    // sequence of paired sums.
    let mut tau = -1.0;
    let mut m = 0usize;
    loop {
        let even = 2 * m;
        let odd = even + 1;
        if odd > max_lag {
            break;
        }
        let pair = autocov(even) + autocov(odd);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair / c0;
        m += 1;
    }
    nf / tau.max(1.0)
}

/// Summarize a scalar functional of the draws across chains.
pub fn scalar_summary<F: Fn(&[f64]) -> f64>(
    chains: &[ChainSamples],
    f: F,
) -> Result<ScalarSummary> {
    let mut pooled = Vec::new();
    let mut ess_total = 0.0;
    for chain in chains {
        let values: Vec<f64> = chain.draws.iter().map(|d| f(d)).collect();
        ess_total += ess(&values);
        pooled.extend(values);
    }
    if pooled.len() < 2 {
        return Err(Error::Dimension(
            "need at least two draws to summarize".into(),
        ));
    }
    let n = pooled.len() as f64;
    let mean = pooled.iter().sum::<f64>() / n;
    let var = pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    Ok(ScalarSummary {
        mean,
        sd,
        mcse: sd / ess_total.max(1.0).sqrt(),
        ess: ess_total,
        n_samples: pooled.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_cdf;

    /// Independent Gaussian coordinates with fixed precisions.
    struct DiagonalGaussian {
        precisions: Vec<f64>,
    }

    impl Target for DiagonalGaussian {
        fn dim(&self) -> usize {
            self.precisions.len()
        }

        fn log_density_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let logp = -0.5
                * x.iter()
                    .zip(&self.precisions)
                    .map(|(xi, q)| q * xi * xi)
                    .sum::<f64>();
            let grad = x
                .iter()
                .zip(&self.precisions)
                .map(|(xi, q)| -q * xi)
                .collect();
            Ok((logp, grad))
        }
    }

    #[test]
    fn leapfrog_is_time_reversible() {
        let target = DiagonalGaussian {
            precisions: vec![1.0, 2.0, 0.5],
        };
        let x0 = vec![0.3, -1.1, 0.7];
        let p_start = vec![0.5, 0.25, -0.75];
        let inv_mass = vec![1.0, 0.5, 2.0];
        let (mut logp, mut grad) = target.log_density_and_grad(&x0).unwrap();
        let mut x = x0.clone();
        let mut p = p_start.clone();
        leapfrog(&target, &mut x, &mut p, &mut grad, &mut logp, 0.05, 30, &inv_mass).unwrap();
        // Negate momentum and integrate back.
        for pj in p.iter_mut() {
            *pj = -*pj;
        }
        leapfrog(&target, &mut x, &mut p, &mut grad, &mut logp, 0.05, 30, &inv_mass).unwrap();
        for j in 0..3 {
            assert!((x[j] - x0[j]).abs() < 1e-10, "position {j}");
            assert!((p[j] + p_start[j]).abs() < 1e-10, "momentum {j}");
        }
    }

    #[test]
    fn energy_error_scales_quadratically_in_step() {
        // Fixed trajectory time T = ε L: halving ε (doubling L) should cut
        // the energy error by about 4 for a symplectic scheme.
        let target = DiagonalGaussian {
            precisions: vec![1.0, 3.0],
        };
        let x0 = vec![1.3, -0.7];
        let p0 = vec![0.4, 0.9];
        let inv_mass = vec![1.0, 1.0];
        let h = |x: &[f64], p: &[f64]| -> f64 {
            let (lp, _) = target.log_density_and_grad(x).unwrap();
            -lp + kinetic(p, &inv_mass)
        };
        let h0 = h(&x0, &p0);
        let energy_error = |eps: f64, steps: usize| -> f64 {
            let mut x = x0.clone();
            let mut p = p0.clone();
            let (mut logp, mut grad) = target.log_density_and_grad(&x).unwrap();
            leapfrog(&target, &mut x, &mut p, &mut grad, &mut logp, eps, steps, &inv_mass)
                .unwrap();
            (h(&x, &p) - h0).abs()
        };
        let coarse = energy_error(0.05, 40);
        let fine = energy_error(0.025, 80);
        let ratio = coarse / fine;
        assert!(
            (3.0..=5.0).contains(&ratio),
            "ratio {ratio} (coarse {coarse}, fine {fine})"
        );
    }

    #[test]
    fn samples_standard_normal_to_ks_tolerance() {
        let target = DiagonalGaussian {
            precisions: vec![1.0],
        };
        let opts = SamplerOptions {
            chains: 2,
            draws: 10_000,
            warmup: 500,
            n_leapfrog: 16,
            ..SamplerOptions::default()
        };
        let chains = run_chains(&target, &[0.1], &opts).unwrap();
        let mut values: Vec<f64> = chains
            .iter()
            .flat_map(|c| c.draws.iter().map(|d| d[0]))
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = values.len() as f64;
        let ks = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let cdf = normal_cdf(*v);
                let hi = ((i + 1) as f64 / n - cdf).abs();
                let lo = (cdf - i as f64 / n).abs();
                hi.max(lo)
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 0.02, "KS distance {ks}");
        for c in &chains {
            assert_eq!(c.divergences, 0);
            assert!(c.accept_rate > 0.6, "acceptance {}", c.accept_rate);
        }
    }

    #[test]
    fn adapts_mass_to_anisotropic_scales() {
        // Variances 100 and 0.01: without mass adaptation a common step
        // size cannot serve both coordinates well.
        let target = DiagonalGaussian {
            precisions: vec![0.01, 100.0],
        };
        let opts = SamplerOptions {
            chains: 2,
            draws: 4000,
            warmup: 1500,
            n_leapfrog: 24,
            ..SamplerOptions::default()
        };
        let chains = run_chains(&target, &[1.0, 0.1], &opts).unwrap();
        for c in &chains {
            assert!(
                c.inv_mass[0] > 20.0 && c.inv_mass[0] < 500.0,
                "wide coordinate mass {:?}",
                c.inv_mass
            );
            assert!(
                c.inv_mass[1] > 0.002 && c.inv_mass[1] < 0.05,
                "narrow coordinate mass {:?}",
                c.inv_mass
            );
        }
        for (j, true_sd) in [(0usize, 10.0f64), (1usize, 0.1f64)] {
            let s = scalar_summary(&chains, |d| d[j]).unwrap();
            assert!(
                s.mean.abs() < 4.0 * s.mcse.max(1e-12),
                "coordinate {j}: mean {} vs mcse {}",
                s.mean,
                s.mcse
            );
            assert!(
                (s.sd - true_sd).abs() / true_sd < 0.15,
                "coordinate {j}: sd {}",
                s.sd
            );
            assert!(s.ess > 200.0, "coordinate {j}: ess {}", s.ess);
        }
    }

    #[test]
    fn chains_are_seed_deterministic() {
        let target = DiagonalGaussian {
            precisions: vec![1.0, 2.0],
        };
        let opts = SamplerOptions {
            chains: 3,
            draws: 200,
            warmup: 100,
            n_leapfrog: 8,
            ..SamplerOptions::default()
        };
        let a = run_chains(&target, &[0.0, 0.0], &opts).unwrap();
        let b = run_chains(&target, &[0.0, 0.0], &opts).unwrap();
        for (ca, cb) in a.iter().zip(&b) {
            assert_eq!(ca.draws, cb.draws);
            assert_eq!(ca.step_size, cb.step_size);
        }
        // A different base seed changes the draws.
        let c = run_chains(
            &target,
            &[0.0, 0.0],
            &SamplerOptions {
                seed: 7,
                ..opts.clone()
            },
        )
        .unwrap();
        assert_ne!(a[0].draws, c[0].draws);
    }

    #[test]
    fn parallel_equals_sequential() {
        let target = DiagonalGaussian {
            precisions: vec![1.0, 0.5],
        };
        let opts = SamplerOptions {
            chains: 4,
            draws: 150,
            warmup: 80,
            n_leapfrog: 8,
            ..SamplerOptions::default()
        };
        let parallel = run_chains(&target, &[0.2, -0.2], &opts).unwrap();
        let sequential: Vec<ChainSamples> = (0..opts.chains)
            .map(|k| run_chain(&target, &[0.2, -0.2], &opts, k).unwrap())
            .collect();
        for (a, b) in parallel.iter().zip(&sequential) {
            assert_eq!(a.draws, b.draws);
            assert_eq!(a.step_size, b.step_size);
            assert_eq!(a.inv_mass, b.inv_mass);
            assert_eq!(a.seed, b.seed);
        }
    }

    #[test]
    fn oversized_steps_are_counted_as_divergences() {
        let target = DiagonalGaussian {
            precisions: vec![400.0],
        };
        // Step size far beyond the stability limit 2/√400 = 0.1.
        let chain = run_chain_fixed(&target, &[0.05], 1.5, &[1.0], 16, 200, 1).unwrap();
        assert!(chain.divergences > 0, "no divergences at absurd step size");
        assert!(chain.divergences <= 200);
    }

    #[test]
    fn ess_matches_autoregressive_oracle() {
        // AR(1) with ρ = 0.9 has integrated autocorrelation (1+ρ)/(1-ρ) = 19.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let rho = 0.9f64;
        let scale = (1.0 - rho * rho).sqrt();
        let n = 20_000;
        let mut x = 0.0f64;
        let series: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                x = rho * x + scale * z;
                x
            })
            .collect();
        let expected = n as f64 / 19.0;
        let got = ess(&series);
        assert!(
            got > expected / 1.5 && got < expected * 1.5,
            "ess {got}, oracle {expected}"
        );
        // Uncorrelated input keeps nearly all of its samples.
        let iid: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let got = ess(&iid);
        assert!(
            got > 0.8 * n as f64 && got < 1.2 * n as f64,
            "iid ess {got}"
        );
    }

    #[test]
    fn initialization_errors_are_reported() {
        struct Wall;
        impl Target for Wall {
            fn dim(&self) -> usize {
                1
            }
            fn log_density_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
                if x[0] <= 0.0 {
                    Ok((f64::NEG_INFINITY, vec![0.0]))
                } else {
                    Ok((-x[0], vec![-1.0]))
                }
            }
        }
        let opts = SamplerOptions {
            chains: 1,
            draws: 10,
            warmup: 10,
            ..SamplerOptions::default()
        };
        assert!(matches!(
            run_chains(&Wall, &[-1.0], &opts),
            Err(Error::Initialization(_))
        ));
        assert!(run_chains(&Wall, &[1.0], &opts).is_ok());
    }
}

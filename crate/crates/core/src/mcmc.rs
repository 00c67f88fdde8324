//! Hamiltonian Monte Carlo on the relaxed log-joint.
//!
//! Fixed-path leapfrog with a Metropolis correction and standard-normal
//! momenta (identity mass matrix). The step size adapts during burn-in by
//! dual averaging toward a target acceptance rate (0.8 by default) and is
//! then frozen for the sampling phase. For the role variant the
//! Gumbel-Softmax noise is drawn once per chain so the target density is
//! deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::abm::Trajectory;
use crate::autodiff::LogDensity;
use crate::error::CoreError;
use crate::exec::{check_deadline, Deadline};
use crate::pgabm::{transform, ParamSpace, PgabmConfig, PosteriorDensity, TrajectoryDensity};
use crate::rng::{fill_standard_gumbel, fill_standard_normal};
use crate::svi::{Method, PosteriorSamples};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcHyperparams {
    /// Initial leapfrog step size (adapted during burn-in unless
    /// `adapt_step_size` is off).
    pub step_size: f64,
    pub n_leapfrog: usize,
    pub n_burnin: usize,
    pub n_samples: usize,
    pub target_accept: f64,
    pub adapt_step_size: bool,
    pub seed: u64,
}

impl Default for HmcHyperparams {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            n_leapfrog: 10,
            n_burnin: 5000,
            n_samples: 5000,
            target_accept: 0.8,
            adapt_step_size: true,
            seed: 0,
        }
    }
}

impl HmcHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || self.n_leapfrog == 0 || self.n_samples == 0 {
            return Err(CoreError::Config(
                "step_size, n_leapfrog, and n_samples must be positive".into(),
            ));
        }
        if !(0.0 < self.target_accept && self.target_accept < 1.0) {
            return Err(CoreError::Config("target_accept must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A proposal whose integration produced non-finite state; rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Divergence;

/// Standard leapfrog integration of Hamiltonian dynamics.
///
/// `grad_fn` returns ∇ log p; the integrator is exactly time-reversible:
/// integrating from `(θ', −p')` returns `(θ, −p)` up to rounding.
pub fn leapfrog<G>(
    theta: &[f64],
    momentum: &[f64],
    step_size: f64,
    n_steps: usize,
    mut grad_fn: G,
) -> std::result::Result<(Vec<f64>, Vec<f64>), Divergence>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut q = theta.to_vec();
    let mut p = momentum.to_vec();
    let mut grad = grad_fn(&q).map_err(|_| Divergence)?;
    for _ in 0..n_steps {
        for i in 0..p.len() {
            p[i] += 0.5 * step_size * grad[i];
        }
        for i in 0..q.len() {
            q[i] += step_size * p[i];
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Divergence);
        }
        grad = grad_fn(&q).map_err(|_| Divergence)?;
        for i in 0..p.len() {
            p[i] += 0.5 * step_size * grad[i];
        }
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Divergence);
    }
    Ok((q, p))
}

/// One recorded draw of an HMC chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainDraw {
    pub theta: Vec<f64>,
    pub log_joint: f64,
    pub accepted: bool,
}

/// Post-burn-in chain with diagnostics.
#[derive(Debug, Clone)]
pub struct HmcChain {
    pub draws: Vec<ChainDraw>,
    pub accept_rate: f64,
    pub step_size: f64,
}

/// Sample any [`LogDensity`] with Metropolis-corrected HMC.
///
/// Burn-in draws are discarded; with adaptation on, the step size follows
/// the dual-averaging recipe toward `target_accept` during burn-in.
/// Errors if the post-burn-in acceptance rate falls below 1%.
pub fn hmc_sample<D: LogDensity>(
    density: &D,
    init: &[f64],
    hyper: &HmcHyperparams,
    deadline: Option<Deadline>,
) -> Result<HmcChain> {
    hyper.validate()?;
    let dim = density.dim();
    if init.len() != dim {
        return Err(CoreError::DimensionMismatch {
            expected: dim,
            got: init.len(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(hyper.seed);
    let mut theta = init.to_vec();
    let (mut log_p, _) = density.value_and_grad(&theta)?;

    // Dual-averaging state (step size only; identity mass matrix).
    let mut eps = hyper.step_size;
    let mu = (10.0 * hyper.step_size).ln();
    let mut log_eps_bar = 0.0f64;
    let mut h_bar = 0.0f64;
    let (gamma, t0, kappa) = (0.05, 10.0, 0.75);

    let mut momentum = vec![0.0; dim];
    let mut draws = Vec::with_capacity(hyper.n_samples);
    let mut accepted_post = 0usize;

    for iter in 0..hyper.n_burnin + hyper.n_samples {
        if iter % 16 == 0 {
            check_deadline(deadline)?;
        }
        fill_standard_normal(&mut rng, &mut momentum);
        let kinetic0: f64 = 0.5 * momentum.iter().map(|p| p * p).sum::<f64>();
        let h0 = -log_p + kinetic0;

        let proposal = leapfrog(&theta, &momentum, eps, hyper.n_leapfrog, |q| {
            density.value_and_grad(q).map(|(_, g)| g)
        });

        let mut alpha = 0.0;
        let mut accept = false;
        if let Ok((q_new, p_new)) = proposal {
            if let Ok((log_p_new, _)) = density.value_and_grad(&q_new) {
                if log_p_new.is_finite() {
                    let kinetic1: f64 = 0.5 * p_new.iter().map(|p| p * p).sum::<f64>();
                    let h1 = -log_p_new + kinetic1;
                    alpha = (h0 - h1).exp().min(1.0);
                    if rng.random::<f64>() < alpha {
                        theta = q_new;
                        log_p = log_p_new;
                        accept = true;
                    }
                }
            }
        }

        if iter < hyper.n_burnin {
            if hyper.adapt_step_size {
                let m = (iter + 1) as f64;
                h_bar = (1.0 - 1.0 / (m + t0)) * h_bar
                    + (hyper.target_accept - alpha) / (m + t0);
                let log_eps = mu - m.sqrt() / gamma * h_bar;
                let w = m.powf(-kappa);
                log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
                eps = log_eps.exp();
                if iter + 1 == hyper.n_burnin {
                    eps = log_eps_bar.exp();
                }
            }
        } else {
            if accept {
                accepted_post += 1;
            }
            draws.push(ChainDraw {
                theta: theta.clone(),
                log_joint: log_p,
                accepted: accept,
            });
        }
    }

    let accept_rate = accepted_post as f64 / hyper.n_samples as f64;
    if accept_rate < 0.01 {
        return Err(CoreError::HmcTuning { rate: accept_rate });
    }
    Ok(HmcChain {
        draws,
        accept_rate,
        step_size: eps,
    })
}

/// Result of [`fit_hmc`]: constrained posterior samples plus the raw chain.
#[derive(Debug, Clone)]
pub struct HmcFit {
    pub samples: PosteriorSamples,
    pub chain: HmcChain,
}

/// HMC over a trajectory's relaxed posterior in unconstrained space.
///
/// The chain starts at θ = 0 (the box centers). Discrete latents enter
/// through the same relaxed parameterization the variational fit uses;
/// the role variant's Gumbel noise is drawn once from the chain seed.
pub fn fit_hmc(
    traj: &Trajectory,
    cfg: &PgabmConfig,
    hyper: &HmcHyperparams,
    deadline: Option<Deadline>,
) -> Result<HmcFit> {
    let density = TrajectoryDensity::new(traj, *cfg)?;
    let mut noise = vec![0.0; density.noise_len()];
    // Distinct stream from the chain's own draws.
    fill_standard_gumbel(
        &mut ChaCha20Rng::seed_from_u64(hyper.seed.wrapping_add(1)),
        &mut noise,
    );
    let posterior = PosteriorDensity::new(&density, noise)?;
    let init = vec![0.0; density.dim()];
    let chain = hmc_sample(&posterior, &init, hyper, deadline)?;

    let space = ParamSpace::from_config(&traj.config);
    let samples = chain
        .draws
        .iter()
        .map(|d| transform(&d.theta, &space))
        .collect::<Result<Vec<_>>>()?;
    Ok(HmcFit {
        samples: PosteriorSamples {
            samples,
            source: Method::Hmc,
        },
        chain,
    })
}

/// Write a chain dump as CSV: draw index, θ components, log-joint,
/// accepted flag.
pub fn write_chain_csv<W: std::io::Write>(mut w: W, chain: &HmcChain) -> Result<()> {
    let dim = chain.draws.first().map_or(0, |d| d.theta.len());
    let header: Vec<String> = std::iter::once("draw".to_string())
        .chain((0..dim).map(|i| format!("theta{i}")))
        .chain(["log_joint".to_string(), "accepted".to_string()])
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, d) in chain.draws.iter().enumerate() {
        let thetas: Vec<String> = d.theta.iter().map(|t| t.to_string()).collect();
        writeln!(
            w,
            "{i},{},{},{}",
            thetas.join(","),
            d.log_joint,
            u8::from(d.accepted)
        )?;
    }
    Ok(())
}

/// Standard normal in `dim` dimensions; test target.
pub struct StandardNormal(pub usize);

impl LogDensity for StandardNormal {
    fn dim(&self) -> usize {
        self.0
    }
    fn log_density<S: crate::autodiff::Scalar>(&self, theta: &[S]) -> S {
        let mut acc = -(theta[0] * theta[0]) * 0.5;
        for &t in &theta[1..] {
            acc = acc - (t * t) * 0.5;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abm::{simulate, LatentParams, ModelConfig, Variant};
    use crate::autodiff::Scalar;

    #[test]
    fn free_particle_moves_linearly() {
        // Zero gradient field: θ' = θ + ε·n·p.
        let grad = |q: &[f64]| Ok(vec![0.0; q.len()]);
        let (q, p) = leapfrog(&[1.0, -2.0], &[0.5, 0.25], 0.1, 7, grad).unwrap();
        assert!((q[0] - (1.0 + 0.1 * 7.0 * 0.5)).abs() < 1e-12);
        assert!((q[1] - (-2.0 + 0.1 * 7.0 * 0.25)).abs() < 1e-12);
        assert_eq!(p, vec![0.5, 0.25]);
    }

    #[test]
    fn harmonic_energy_error_scales_quadratically() {
        // On −θ²/2 the leapfrog energy error shrinks ~4× when the step
        // halves (same trajectory length).
        let grad = |q: &[f64]| Ok(vec![-q[0]]);
        let h = |q: &[f64], p: &[f64]| 0.5 * q[0] * q[0] + 0.5 * p[0] * p[0];
        let (q0, p0) = ([1.0], [0.3]);
        let mut errors = Vec::new();
        for &(eps, n) in &[(0.2, 50), (0.1, 100)] {
            let (q, p) = leapfrog(&q0, &p0, eps, n, grad).unwrap();
            errors.push((h(&q, &p) - h(&q0, &p0)).abs());
        }
        let ratio = errors[0] / errors[1];
        assert!((2.0..8.0).contains(&ratio), "ratio {ratio}, errors {errors:?}");
    }

    #[test]
    fn leapfrog_is_time_reversible() {
        let grad = |q: &[f64]| Ok(vec![-q[0] - 0.3 * q[0].powi(3), -q[1]]);
        let theta = [0.7, -1.2];
        let momentum = [0.4, 0.9];
        let (q1, p1) = leapfrog(&theta, &momentum, 0.05, 25, grad).unwrap();
        let neg_p1: Vec<f64> = p1.iter().map(|p| -p).collect();
        let (q2, p2) = leapfrog(&q1, &neg_p1, 0.05, 25, grad).unwrap();
        for i in 0..2 {
            assert!((q2[i] - theta[i]).abs() < 1e-10);
            assert!((-p2[i] - momentum[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn standard_normal_moments_are_recovered() {
        let hyper = HmcHyperparams {
            n_burnin: 500,
            n_samples: 5000,
            n_leapfrog: 8,
            ..Default::default()
        }
        .with_seed(12);
        let chain = hmc_sample(&StandardNormal(1), &[0.0], &hyper, None).unwrap();
        assert_eq!(chain.draws.len(), 5000);
        let n = chain.draws.len() as f64;
        let mean: f64 = chain.draws.iter().map(|d| d.theta[0]).sum::<f64>() / n;
        let var: f64 = chain
            .draws
            .iter()
            .map(|d| (d.theta[0] - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
        assert!(chain.accept_rate > 0.5);
        // Every retained draw has a finite log-joint.
        assert!(chain.draws.iter().all(|d| d.log_joint.is_finite()));
    }

    #[test]
    fn correlated_gaussian_covariance_within_fifteen_percent() {
        // Target: zero-mean Gaussian with Σ = [[1, 0.6], [0.6, 1]].
        // log p = -(θᵀ Σ⁻¹ θ)/2; Σ⁻¹ = [[a, b], [b, a]] with
        // a = 1/(1−ρ²), b = −ρ/(1−ρ²).
        struct Corr;
        impl LogDensity for Corr {
            fn dim(&self) -> usize {
                2
            }
            fn log_density<S: Scalar>(&self, t: &[S]) -> S {
                let a = 1.0 / (1.0 - 0.36);
                let b = -0.6 / (1.0 - 0.36);
                -((t[0] * t[0]) * a + (t[0] * t[1]) * (2.0 * b) + (t[1] * t[1]) * a) * 0.5
            }
        }
        let hyper = HmcHyperparams {
            n_burnin: 500,
            n_samples: 5000,
            n_leapfrog: 10,
            ..Default::default()
        }
        .with_seed(3);
        let chain = hmc_sample(&Corr, &[0.0, 0.0], &hyper, None).unwrap();
        let n = chain.draws.len() as f64;
        let mut c = [[0.0f64; 2]; 2];
        for d in &chain.draws {
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += d.theta[i] * d.theta[j];
                }
            }
        }
        for row in &mut c {
            for v in row.iter_mut() {
                *v /= n;
            }
        }
        assert!((c[0][0] - 1.0).abs() < 0.15, "var0 {}", c[0][0]);
        assert!((c[1][1] - 1.0).abs() < 0.15, "var1 {}", c[1][1]);
        assert!((c[0][1] - 0.6).abs() < 0.15, "cov {}", c[0][1]);
    }

    #[test]
    fn chains_are_reproducible_and_tuning_errors_surface() {
        let hyper = HmcHyperparams {
            n_burnin: 50,
            n_samples: 100,
            ..Default::default()
        }
        .with_seed(5);
        let a = hmc_sample(&StandardNormal(2), &[0.0, 0.0], &hyper, None).unwrap();
        let b = hmc_sample(&StandardNormal(2), &[0.0, 0.0], &hyper, None).unwrap();
        assert_eq!(a.draws.len(), b.draws.len());
        for (x, y) in a.draws.iter().zip(&b.draws) {
            assert_eq!(x.theta, y.theta);
        }

        // Absurd fixed step size → every proposal rejected → tuning error.
        let bad = HmcHyperparams {
            step_size: 1e6,
            adapt_step_size: false,
            n_burnin: 10,
            n_samples: 200,
            ..Default::default()
        };
        assert!(matches!(
            hmc_sample(&StandardNormal(1), &[0.0], &bad, None),
            Err(CoreError::HmcTuning { .. })
        ));
    }

    #[test]
    fn fit_hmc_runs_on_a_small_trajectory() {
        let config = ModelConfig::new(Variant::Bcmb, 15, 16, 44);
        let traj = simulate(&config, &LatentParams::bcmb(0.3, 0.7)).unwrap();
        let hyper = HmcHyperparams {
            n_burnin: 100,
            n_samples: 150,
            ..Default::default()
        }
        .with_seed(2);
        let fit = fit_hmc(&traj, &PgabmConfig::default(), &hyper, None).unwrap();
        assert_eq!(fit.samples.samples.len(), 150);
        assert_eq!(fit.samples.source, Method::Hmc);
        for s in &fit.samples.samples {
            assert!((0.0..=0.5).contains(&s.eps_plus));
        }
        let mut csv = Vec::new();
        write_chain_csv(&mut csv, &fit.chain).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("draw,theta0,theta1,log_joint,accepted"));
        assert_eq!(text.lines().count(), 151);
    }
}

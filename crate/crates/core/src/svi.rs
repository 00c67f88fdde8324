//! Stochastic variational inference with a mean-field normal family.
//!
//! The variational distribution is a diagonal normal over the
//! unconstrained parameters, `q_λ(θ) = N(θ; mean, diag(exp(log_scale)²))`.
//! Each epoch draws `θ = mean + exp(log_scale) ⊙ z` with fresh standard
//! normal `z` (the reparameterization trick), evaluates the trajectory
//! log-joint on the autodiff tape, adds the normal family's entropy in
//! closed form (variance reduction over a Monte Carlo `−ln q` term), and
//! takes one Adam ascent step on the resulting single-sample ELBO
//! estimate. Event minibatching with likelihood rescaling is available
//! for long trajectories; the prior term is never rescaled.
//!
//! The family abstraction is the pair (mean, log-scale); richer families
//! plug in by replacing [`VariationalParams`] and the two closed forms
//! (`entropy`, sampling), leaving the density machinery untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::abm::Trajectory;
use crate::autodiff::{LogDensity, Scalar, Tape};
use crate::error::CoreError;
use crate::exec::{check_deadline, Deadline};
use crate::pgabm::{transform, ConstrainedParams, ParamSpace, PgabmConfig, TrajectoryDensity};
use crate::rng::{fill_standard_gumbel, fill_standard_normal, DistinctSampler};
use crate::Result;

/// Samples drawn from a fitted posterior, whatever the method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub samples: Vec<ConstrainedParams>,
    pub source: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Svi,
    Hmc,
    Abc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Svi => "svi",
            Method::Hmc => "hmc",
            Method::Abc => "abc",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svi" => Ok(Method::Svi),
            "hmc" | "mcmc" => Ok(Method::Hmc),
            "abc" => Ok(Method::Abc),
            other => Err(CoreError::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Default number of posterior draws used for point estimates.
pub const DEFAULT_POSTERIOR_SAMPLES: usize = 200;

/// Mean-field normal variational parameters λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalParams {
    pub mean: Vec<f64>,
    pub log_scale: Vec<f64>,
}

impl VariationalParams {
    /// Zero mean, uniform initial scale.
    pub fn init(dim: usize, init_scale: f64) -> Self {
        Self {
            mean: vec![0.0; dim],
            log_scale: vec![init_scale.ln(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Closed-form differential entropy of the diagonal normal:
    /// `Σ log_scaleᵢ + (dim/2)(1 + ln 2π)`.
    pub fn entropy(&self) -> f64 {
        let m = self.dim() as f64;
        self.log_scale.iter().sum::<f64>()
            + 0.5 * m * (1.0 + (2.0 * std::f64::consts::PI).ln())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SviHyperparams {
    pub learning_rate: f64,
    pub n_epochs: usize,
    pub elbo_samples_per_step: usize,
    /// Uniform event subsample size per step; the likelihood is rescaled
    /// by `total_events / batch`. `None` = full batch.
    pub minibatch_events: Option<usize>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Initial scale of the variational family.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SviHyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            n_epochs: 20_000,
            elbo_samples_per_step: 1,
            minibatch_events: None,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl SviHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(CoreError::Config("learning_rate must be positive".into()));
        }
        if self.n_epochs == 0 || self.elbo_samples_per_step == 0 {
            return Err(CoreError::Config(
                "epoch and sample counts must be positive".into(),
            ));
        }
        if !(0.0 < self.adam_beta1 && self.adam_beta1 < 1.0)
            || !(0.0 < self.adam_beta2 && self.adam_beta2 < 1.0)
        {
            return Err(CoreError::Config("Adam betas must lie in (0, 1)".into()));
        }
        if self.minibatch_events == Some(0) {
            return Err(CoreError::Config("minibatch_events must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Adam hyperparameters, shared by every optimizer call site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment state of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam ascent step: `params += lr · m̂ / (√v̂ + eps)`.
pub fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    if params.len() != grad.len() || params.len() != state.m.len() {
        return Err(CoreError::DimensionMismatch {
            expected: state.m.len(),
            got: grad.len(),
        });
    }
    if let Some(coord) = grad.iter().position(|g| !g.is_finite()) {
        return Err(CoreError::NonFiniteGrad { coord });
    }
    state.t += 1;
    let bc1 = 1.0 - hyper.beta1.powi(state.t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] += hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.eps);
    }
    Ok(())
}

/// Result of [`fit_svi`].
#[derive(Debug, Clone)]
pub struct SviFit {
    pub lambda: VariationalParams,
    /// Per-epoch single-draw ELBO estimates.
    pub elbo_trace: Vec<f64>,
}

/// Maximize the ELBO over the mean-field family by stochastic gradient
/// ascent for a fixed epoch budget. Deterministic given the seed.
pub fn fit_svi(
    traj: &Trajectory,
    cfg: &PgabmConfig,
    hyper: &SviHyperparams,
    deadline: Option<Deadline>,
) -> Result<SviFit> {
    hyper.validate()?;
    let density = TrajectoryDensity::new(traj, *cfg)?;
    let dim = density.dim();
    let n_events = density.n_events();
    let entropy_const = 0.5 * dim as f64 * (1.0 + (2.0 * std::f64::consts::PI).ln());

    // λ lives as one flat vector [mean | log_scale] for the optimizer.
    let mut params = vec![0.0; 2 * dim];
    params[dim..].fill(hyper.init_scale.ln());
    let mut adam_state = AdamState::new(2 * dim);
    let adam = AdamHyper {
        learning_rate: hyper.learning_rate,
        beta1: hyper.adam_beta1,
        beta2: hyper.adam_beta2,
        eps: hyper.adam_eps,
    };

    let mut rng = ChaCha20Rng::seed_from_u64(hyper.seed);
    let mut z = vec![0.0; dim];
    let mut gumbel = vec![0.0; density.noise_len()];
    let batch_size = hyper
        .minibatch_events
        .filter(|&b| n_events > 0 && b < n_events);
    let mut batch_sampler = batch_size.map(|_| DistinctSampler::new(n_events));
    let mut batch_buf: Vec<u32> = Vec::new();

    let per_event_nodes = 40; // generous upper bound across variants
    let capacity = batch_size.unwrap_or(n_events) * per_event_nodes + dim * 40 + 64;

    let mut trace = Vec::with_capacity(hyper.n_epochs);
    for epoch in 0..hyper.n_epochs {
        check_deadline(deadline)?;
        let batch: Option<&[u32]> = match (&mut batch_sampler, batch_size) {
            (Some(sampler), Some(b)) => {
                sampler.sample(&mut rng, b, &mut batch_buf);
                Some(&batch_buf)
            }
            _ => None,
        };

        let tape = Tape::with_capacity(capacity);
        let mean_vars = tape.inputs(&params[..dim]);
        let scale_vars = tape.inputs(&params[dim..]);

        let mut objective: Option<crate::autodiff::Var<'_>> = None;
        for _ in 0..hyper.elbo_samples_per_step {
            fill_standard_normal(&mut rng, &mut z);
            fill_standard_gumbel(&mut rng, &mut gumbel);
            let theta: Vec<_> = (0..dim)
                .map(|i| scale_vars[i].exp() * z[i] + mean_vars[i])
                .collect();
            let lj = density.log_joint_generic(&theta, &gumbel, batch)?;
            objective = Some(match objective {
                None => lj,
                Some(acc) => acc + lj,
            });
        }
        let mut elbo = objective.expect("at least one ELBO sample");
        if hyper.elbo_samples_per_step > 1 {
            elbo = elbo / hyper.elbo_samples_per_step as f64;
        }
        // Exact entropy of the diagonal normal.
        let mut ent = scale_vars[0];
        for &s in &scale_vars[1..] {
            ent = ent + s;
        }
        elbo = elbo + (ent + entropy_const);

        let value = elbo.value();
        if !value.is_finite() {
            return Err(CoreError::SviDiverged { epoch });
        }
        let grad = tape.gradient(elbo)?;
        adam_step(&mut params, &grad, &mut adam_state, &adam)?;
        trace.push(value);
    }

    Ok(SviFit {
        lambda: VariationalParams {
            mean: params[..dim].to_vec(),
            log_scale: params[dim..].to_vec(),
        },
        elbo_trace: trace,
    })
}

/// Monte Carlo ELBO samples for a trajectory: each entry is
/// `log p(y, θᵢ) + H(q_λ)` with `θᵢ = mean + exp(log_scale) ⊙ zᵢ`.
pub fn elbo_samples(
    lambda: &VariationalParams,
    traj: &Trajectory,
    cfg: &PgabmConfig,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let density = TrajectoryDensity::new(traj, *cfg)?;
    if lambda.dim() != density.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: density.dim(),
            got: lambda.dim(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut z = vec![0.0; lambda.dim()];
    let mut gumbel = vec![0.0; density.noise_len()];
    let entropy = lambda.entropy();
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        fill_standard_normal(&mut rng, &mut z);
        fill_standard_gumbel(&mut rng, &mut gumbel);
        let theta: Vec<f64> = (0..lambda.dim())
            .map(|i| lambda.mean[i] + lambda.log_scale[i].exp() * z[i])
            .collect();
        let lj = density.log_joint_f64(&theta, &gumbel).map_err(|e| match e {
            CoreError::PoisonedLogJoint { event } => CoreError::Invalid(format!(
                "non-finite ELBO sample at event {event} for θ = {theta:?}"
            )),
            other => other,
        })?;
        out.push(lj + entropy);
    }
    Ok(out)
}

/// Unbiased Monte Carlo ELBO estimate (mean of [`elbo_samples`]).
pub fn elbo_estimate(
    lambda: &VariationalParams,
    traj: &Trajectory,
    cfg: &PgabmConfig,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let samples = elbo_samples(lambda, traj, cfg, n_samples, seed)?;
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// ELBO samples against an arbitrary (noise-free) log-density; used by
/// the bound checks on quadrature toy models.
pub fn elbo_samples_for<D: LogDensity>(
    density: &D,
    lambda: &VariationalParams,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if lambda.dim() != density.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: density.dim(),
            got: lambda.dim(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut z = vec![0.0; lambda.dim()];
    let entropy = lambda.entropy();
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        fill_standard_normal(&mut rng, &mut z);
        let theta: Vec<f64> = (0..lambda.dim())
            .map(|i| lambda.mean[i] + lambda.log_scale[i].exp() * z[i])
            .collect();
        out.push(density.log_density(&theta) + entropy);
    }
    Ok(out)
}

/// Draw constrained posterior samples from a fitted variational family.
pub fn sample_posterior(
    lambda: &VariationalParams,
    space: &ParamSpace,
    n: usize,
    seed: u64,
) -> Result<PosteriorSamples> {
    if lambda.dim() != space.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: space.dim(),
            got: lambda.dim(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut z = vec![0.0; lambda.dim()];
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        fill_standard_normal(&mut rng, &mut z);
        let theta: Vec<f64> = (0..lambda.dim())
            .map(|i| lambda.mean[i] + lambda.log_scale[i].exp() * z[i])
            .collect();
        samples.push(transform(&theta, space)?);
    }
    Ok(PosteriorSamples {
        samples,
        source: Method::Svi,
    })
}

/// Write an ELBO trace as `epoch,elbo` CSV.
pub fn write_elbo_trace<W: std::io::Write>(mut w: W, trace: &[f64]) -> Result<()> {
    writeln!(w, "epoch,elbo")?;
    for (epoch, elbo) in trace.iter().enumerate() {
        writeln!(w, "{epoch},{elbo}")?;
    }
    Ok(())
}

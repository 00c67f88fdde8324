//! Differentiable log-joint densities over observed trajectories.
//!
//! Interactions are conditionally independent given the (deterministic)
//! opinion path, so the log-likelihood is a sum of per-event Bernoulli
//! terms. [`TrajectoryDensity`] replays every needed opinion path once at
//! construction and stores the per-event gaps as plain numbers; evaluating
//! the density at a parameter vector then touches only θ-dependent math,
//! which keeps tapes small for gradient work.
//!
//! Discrete latents:
//!
//! * BCM-S — per-agent roles are sampled as Gumbel-Softmax relaxations
//!   from caller-provided noise (one pair of Gumbel draws per agent per
//!   evaluation), and each agent's effective thresholds interpolate the
//!   leader/follower values: `ε̃ᵤ = r̃ᵤ ε̂_L + (1 − r̃ᵤ) ε̂_F`.
//! * BCM-I — the attention depth is marginalized exactly per event:
//!   `κ̃ = Σⱼ φ̃ⱼ κ(ε, j)` with `φ̃` the renormalized per-position sigmoid
//!   probabilities, each `κ(ε, j)` evaluated on the path replayed under
//!   depth `j`.
//! * BCM-U — a two-component mixture over the backfire switch with both
//!   opinion paths precomputed; the weight of the β = 0 path is `σ(θ₃)`.
//!
//! Mixtures are evaluated in log space through `log-sum-exp` of
//! `log-sigmoid` terms, so ρ = 32 poses no underflow problem. Sums run in
//! event order (ascending index) for bit-reproducibility.

use crate::abm::{Dynamics, Trajectory, Variant};
use crate::autodiff::{log_add_exp, log_sum_exp, LogDensity, Scalar};
use crate::error::CoreError;
use crate::Result;

use super::replay::{replay_opinions, ReplayHypothesis};
use super::{gumbel_softmax_from_logits, log_jacobian_generic, ParamSpace, PgabmConfig};

/// Per-event observed outcome, packed for cache-friendly iteration.
#[derive(Clone, Copy)]
struct EventObs {
    s_plus: bool,
    s_minus: bool,
    s_rewire: bool,
    is_update: bool,
    /// Target agent (BCM-S only).
    target: u32,
}

enum Gaps {
    /// One gap per event.
    Single(Vec<f64>),
    /// Row-major `[event × hypothesis]` gaps for the K mixture.
    PerDepth { flat: Vec<f64>, depths: usize },
    /// Gap per event under β = 0 and β = 1.
    PerBeta(Vec<f64>, Vec<f64>),
}

/// A trajectory compiled into an efficiently evaluable log-joint over the
/// unconstrained parameter vector θ.
pub struct TrajectoryDensity {
    space: ParamSpace,
    cfg: PgabmConfig,
    obs: Vec<EventObs>,
    gaps: Gaps,
}

impl TrajectoryDensity {
    pub fn new(traj: &Trajectory, cfg: PgabmConfig) -> Result<Self> {
        cfg.validate()?;
        traj.config.validate()?;
        let space = ParamSpace::from_config(&traj.config);
        let variant = traj.config.variant;

        if variant == Variant::Bcms
            && (traj.config.mu_plus_l() != traj.config.mu_plus
                || traj.config.mu_minus_l() != traj.config.mu_minus)
        {
            return Err(CoreError::Config(
                "BCM-S inference requires equal leader and follower update rates; \
                 with latent roles the opinion path is only a deterministic function \
                 of the observed data when the rates coincide"
                    .into(),
            ));
        }

        for (i, e) in traj.events.iter().enumerate() {
            let expected = match variant {
                Variant::Bcmi => space.feed_len as usize + 1,
                _ => 2,
            };
            let ok = match variant {
                Variant::Bcmg => e.participants.len() == 2 || e.participants.len() == 4,
                _ => e.participants.len() == expected,
            };
            if !ok || e.participants.iter().any(|&a| a >= traj.config.n_agents) {
                return Err(CoreError::Format(format!(
                    "event {i} has malformed participants for variant {variant}"
                )));
            }
            if variant != Variant::Bcmg && e.d == Dynamics::Rewire {
                return Err(CoreError::Format(format!(
                    "event {i}: rewiring dynamics outside BCM-G"
                )));
            }
            if e.s_rewire && e.d != Dynamics::Rewire {
                return Err(CoreError::Format(format!(
                    "event {i}: s_rewire set on update dynamics"
                )));
            }
        }

        let obs: Vec<EventObs> = traj
            .events
            .iter()
            .map(|e| EventObs {
                s_plus: e.s_plus,
                s_minus: e.s_minus,
                s_rewire: e.s_rewire,
                is_update: e.d == Dynamics::Update,
                target: match variant {
                    Variant::Bcms => e.pair().1,
                    _ => 0,
                },
            })
            .collect();

        let gaps = match variant {
            Variant::Bcmb | Variant::Bcmg => Gaps::Single(abs_deltas(
                replay_opinions(traj, ReplayHypothesis::Plain)?.deltas,
            )),
            Variant::Bcms => Gaps::Single(abs_deltas(
                replay_opinions(traj, ReplayHypothesis::FollowerRates)?.deltas,
            )),
            Variant::Bcmu => Gaps::PerBeta(
                abs_deltas(replay_opinions(traj, ReplayHypothesis::Backfire(false))?.deltas),
                abs_deltas(replay_opinions(traj, ReplayHypothesis::Backfire(true))?.deltas),
            ),
            Variant::Bcmi => {
                let depths = space.feed_len as usize;
                let n = traj.events.len();
                let mut flat = vec![0.0; n * depths];
                for k in 1..=depths {
                    let trace = replay_opinions(traj, ReplayHypothesis::Attention(k as u32))?;
                    for (i, d) in trace.deltas.iter().enumerate() {
                        flat[i * depths + (k - 1)] = d.abs();
                    }
                }
                Gaps::PerDepth { flat, depths }
            }
        };

        Ok(Self {
            space,
            cfg,
            obs,
            gaps,
        })
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn n_events(&self) -> usize {
        self.obs.len()
    }

    /// Required length of the noise slice: two Gumbel draws per agent for
    /// BCM-S, zero elsewhere.
    pub fn noise_len(&self) -> usize {
        match self.space.variant {
            Variant::Bcms => 2 * self.space.n_agents as usize,
            _ => 0,
        }
    }

    fn check_args(&self, theta_len: usize, noise_len: usize, batch: Option<&[u32]>) -> Result<()> {
        if theta_len != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: theta_len,
            });
        }
        if noise_len != self.noise_len() {
            return Err(CoreError::DimensionMismatch {
                expected: self.noise_len(),
                got: noise_len,
            });
        }
        if let Some(batch) = batch {
            if batch.is_empty() {
                return Err(CoreError::Invalid("empty event batch".into()));
            }
            if let Some(&bad) = batch.iter().find(|&&i| i as usize >= self.n_events()) {
                return Err(CoreError::Invalid(format!(
                    "batch index {bad} out of range ({} events)",
                    self.n_events()
                )));
            }
        }
        Ok(())
    }

    /// Sum of per-event Bernoulli log-probabilities.
    ///
    /// With `batch` set, only those events are evaluated and the sum is
    /// rescaled by `n_events / batch_len`, giving an unbiased estimate of
    /// the full-data log-likelihood for uniform subsamples.
    pub fn log_likelihood<S: Scalar>(
        &self,
        theta: &[S],
        noise: &[f64],
        batch: Option<&[u32]>,
    ) -> Result<S> {
        self.check_args(theta.len(), noise.len(), batch)?;
        let rho = self.cfg.rho;
        let mut acc = theta[0].constant_like(0.0);

        match (&self.gaps, self.space.variant) {
            (Gaps::Single(gaps), Variant::Bcmb) => {
                let eps_p = theta[0].sigmoid() * 0.5;
                let eps_m = theta[1].sigmoid() * 0.5 + 0.5;
                for_each(batch, self.obs.len(), |i| {
                    let o = &self.obs[i];
                    let gap = gaps[i];
                    acc = acc + bernoulli_pair(eps_p, eps_m, gap, rho, o.s_plus, o.s_minus);
                });
            }
            (Gaps::Single(gaps), Variant::Bcms) => {
                let eps_f_p = theta[0].sigmoid() * 0.5;
                let eps_l_p = theta[1].sigmoid() * 0.5;
                let eps_f_m = theta[2].sigmoid() * 0.5 + 0.5;
                let eps_l_m = theta[3].sigmoid() * 0.5 + 0.5;
                let diff_p = eps_l_p - eps_f_p;
                let diff_m = eps_l_m - eps_f_m;
                let n = self.space.n_agents as usize;
                let mut eps_p = Vec::with_capacity(n);
                let mut eps_m = Vec::with_capacity(n);
                for u in 0..n {
                    let t = theta[4 + u];
                    let logits = [t.log_sigmoid(), (-t).log_sigmoid()];
                    let relaxed =
                        gumbel_softmax_from_logits(&logits, self.cfg.tau, &noise[2 * u..2 * u + 2]);
                    let leader_share = relaxed[0];
                    eps_p.push(leader_share * diff_p + eps_f_p);
                    eps_m.push(leader_share * diff_m + eps_f_m);
                }
                for_each(batch, self.obs.len(), |i| {
                    let o = &self.obs[i];
                    let v = o.target as usize;
                    acc = acc
                        + bernoulli_pair(eps_p[v], eps_m[v], gaps[i], rho, o.s_plus, o.s_minus);
                });
            }
            (Gaps::PerDepth { flat, depths }, Variant::Bcmi) => {
                let eps_p = theta[0].sigmoid() * 0.5;
                let eps_m = theta[1].sigmoid() * 0.5 + 0.5;
                // Renormalized attention probabilities in log space.
                let raw: Vec<S> = (0..*depths).map(|j| theta[2 + j].log_sigmoid()).collect();
                let norm = log_sum_exp(&raw);
                let log_phi: Vec<S> = raw.iter().map(|&r| r - norm).collect();
                let mut terms: Vec<S> = Vec::with_capacity(*depths);
                for_each(batch, self.obs.len(), |i| {
                    let o = &self.obs[i];
                    let row = &flat[i * depths..(i + 1) * depths];
                    let sign_p = if o.s_plus { rho } else { -rho };
                    terms.clear();
                    for j in 0..*depths {
                        terms.push(log_phi[j] + ((eps_p - row[j]) * sign_p).log_sigmoid());
                    }
                    acc = acc + log_sum_exp(&terms);
                    let sign_m = if o.s_minus { -rho } else { rho };
                    terms.clear();
                    for j in 0..*depths {
                        terms.push(log_phi[j] + ((eps_m - row[j]) * sign_m).log_sigmoid());
                    }
                    acc = acc + log_sum_exp(&terms);
                });
            }
            (Gaps::PerBeta(gaps0, gaps1), Variant::Bcmu) => {
                let eps_p = theta[0].sigmoid() * 0.5;
                let eps_m = theta[1].sigmoid() * 0.5 + 0.5;
                // Mixture weight of the β = 0 path is σ(θ₃).
                let w0 = theta[2].log_sigmoid();
                let w1 = (-theta[2]).log_sigmoid();
                for_each(batch, self.obs.len(), |i| {
                    let o = &self.obs[i];
                    let sign_p = if o.s_plus { rho } else { -rho };
                    let t0 = w0 + ((eps_p - gaps0[i]) * sign_p).log_sigmoid();
                    let t1 = w1 + ((eps_p - gaps1[i]) * sign_p).log_sigmoid();
                    acc = acc + log_add_exp(t0, t1);
                    let sign_m = if o.s_minus { -rho } else { rho };
                    let t0 = w0 + ((eps_m - gaps0[i]) * sign_m).log_sigmoid();
                    let t1 = w1 + ((eps_m - gaps1[i]) * sign_m).log_sigmoid();
                    acc = acc + log_add_exp(t0, t1);
                });
            }
            (Gaps::Single(gaps), Variant::Bcmg) => {
                let eps_p = theta[0].sigmoid() * 0.5;
                let eps_m = theta[1].sigmoid() * 0.5 + 0.5;
                let gamma = theta[2].sigmoid();
                for_each(batch, self.obs.len(), |i| {
                    let o = &self.obs[i];
                    if o.is_update {
                        acc = acc
                            + bernoulli_pair(eps_p, eps_m, gaps[i], rho, o.s_plus, o.s_minus);
                    } else {
                        let sign = if o.s_rewire { -rho } else { rho };
                        acc = acc + ((gamma - gaps[i]) * sign).log_sigmoid();
                    }
                });
            }
            _ => unreachable!("gap layout always matches the variant"),
        }

        if let Some(batch) = batch {
            let scale = self.obs.len() as f64 / batch.len() as f64;
            acc = acc * scale;
        }
        Ok(acc)
    }

    /// Log-likelihood plus the flat-prior log-Jacobian (the prior term is
    /// never rescaled by minibatching).
    pub fn log_joint_generic<S: Scalar>(
        &self,
        theta: &[S],
        noise: &[f64],
        batch: Option<&[u32]>,
    ) -> Result<S> {
        let ll = self.log_likelihood(theta, noise, batch)?;
        Ok(ll + log_jacobian_generic(theta, &self.space))
    }

    /// Plain-value evaluation with poisoned-event detection: a non-finite
    /// result is traced back to the first offending event index.
    pub fn log_joint_f64(&self, theta: &[f64], noise: &[f64]) -> Result<f64> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(CoreError::Invalid("non-finite theta".into()));
        }
        let v = self.log_joint_generic(theta, noise, None)?;
        if v.is_finite() {
            return Ok(v);
        }
        for i in 0..self.n_events() {
            let term = self.log_likelihood(theta, noise, Some(&[i as u32]))?;
            if !term.is_finite() {
                return Err(CoreError::PoisonedLogJoint { event: i });
            }
        }
        Err(CoreError::PoisonedLogJoint {
            event: self.n_events(),
        })
    }
}

fn abs_deltas(deltas: Vec<f64>) -> Vec<f64> {
    deltas.into_iter().map(f64::abs).collect()
}

/// Bernoulli log-probabilities of the two independent outcomes of one
/// update event: `s⁺ ~ Bern(σ(ρ(ε⁺−gap)))`, `s⁻ ~ Bern(σ(−ρ(ε⁻−gap)))`.
fn bernoulli_pair<S: Scalar>(
    eps_plus: S,
    eps_minus: S,
    gap: f64,
    rho: f64,
    s_plus: bool,
    s_minus: bool,
) -> S {
    let sign_p = if s_plus { rho } else { -rho };
    let tp = ((eps_plus - gap) * sign_p).log_sigmoid();
    let sign_m = if s_minus { -rho } else { rho };
    let tm = ((eps_minus - gap) * sign_m).log_sigmoid();
    tp + tm
}

fn for_each<F: FnMut(usize)>(batch: Option<&[u32]>, n: usize, mut f: F) {
    match batch {
        Some(b) => {
            for &i in b {
                f(i as usize);
            }
        }
        None => {
            for i in 0..n {
                f(i);
            }
        }
    }
}

/// One-shot log-joint of a trajectory at θ (spec-level convenience; use
/// [`TrajectoryDensity`] directly in loops).
pub fn log_joint(
    traj: &Trajectory,
    theta: &[f64],
    cfg: &PgabmConfig,
    noise: &[f64],
) -> Result<f64> {
    TrajectoryDensity::new(traj, *cfg)?.log_joint_f64(theta, noise)
}

/// [`LogDensity`] view of a trajectory posterior with the Gumbel noise
/// held fixed, as HMC requires a deterministic target.
pub struct PosteriorDensity<'a> {
    density: &'a TrajectoryDensity,
    noise: Vec<f64>,
}

impl<'a> PosteriorDensity<'a> {
    pub fn new(density: &'a TrajectoryDensity, noise: Vec<f64>) -> Result<Self> {
        if noise.len() != density.noise_len() {
            return Err(CoreError::DimensionMismatch {
                expected: density.noise_len(),
                got: noise.len(),
            });
        }
        Ok(Self { density, noise })
    }
}

impl LogDensity for PosteriorDensity<'_> {
    fn dim(&self) -> usize {
        self.density.dim()
    }

    fn log_density<S: Scalar>(&self, theta: &[S]) -> S {
        self.density
            .log_joint_generic(theta, &self.noise, None)
            .expect("dimensions validated at construction")
    }
}

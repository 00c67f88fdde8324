//! The differentiable generative counterpart of the simulators.
//!
//! Each hard-threshold outcome is relaxed to a Bernoulli whose probability
//! is a steep sigmoid in the opinion gap:
//!
//! * `P(s⁺ = 1) = σ(ρ (ε⁺ − |Δx|))`
//! * `P(s⁻ = 1) = σ(−ρ (ε⁻ − |Δx|))`
//! * `P(s^r = 1) = σ(−ρ (γ − |Δx|))` (rewiring dynamics only)
//!
//! with steepness `ρ = 32` by default: outcomes outside the confidence
//! bounds keep probability ≤ 1e−5, and every parameter value explains the
//! data with nonzero probability, which is what makes gradient-based
//! inference possible. `s⁺` and `s⁻` are sampled independently in this
//! relaxation.
//!
//! Inference runs in unconstrained space: a parameter vector `θ ∈ ℝ^M` is
//! mapped componentwise through sigmoids into the constrained boxes
//! (`ε⁺ = σ(θ)/2`, `ε⁻ = σ(θ)/2 + 1/2`, probabilities `σ(θ)`), with a flat
//! prior on the constrained boxes expressed as the transform's
//! log-Jacobian. Discrete latents are relaxed: per-agent roles through
//! sampled Gumbel-Softmax draws, attention depth and the backfire switch
//! through exact probability-weighted mixtures (see [`TrajectoryDensity`]).
//!
//! All probability math is generic over [`Scalar`], so the same code path
//! evaluates plain values and records gradients.

mod density;
mod replay;

pub use density::{log_joint, PosteriorDensity, TrajectoryDensity};
pub use replay::{replay_opinions, ReplayHypothesis, ReplayTrace};

use serde::{Deserialize, Serialize};

use crate::abm::{Dynamics, InteractionEvent, ModelConfig, Variant};
use crate::autodiff::{log_sum_exp, Scalar};
use crate::error::CoreError;
use crate::Result;

/// Relaxation constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgabmConfig {
    /// Sigmoid steepness ρ.
    pub rho: f64,
    /// Gumbel-Softmax temperature τ.
    pub tau: f64,
}

impl Default for PgabmConfig {
    fn default() -> Self {
        Self { rho: 32.0, tau: 0.1 }
    }
}

impl PgabmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !(self.tau > 0.0) {
            return Err(CoreError::Config(format!(
                "rho and tau must be positive, got rho={}, tau={}",
                self.rho, self.tau
            )));
        }
        Ok(())
    }
}

/// Shape of the unconstrained parameter space for one model instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSpace {
    pub variant: Variant,
    pub n_agents: u32,
    /// Feed length (BCM-I only; 0 elsewhere).
    pub feed_len: u32,
}

impl ParamSpace {
    pub fn from_config(config: &ModelConfig) -> Self {
        Self {
            variant: config.variant,
            n_agents: config.n_agents,
            feed_len: config.feed_len.unwrap_or(0),
        }
    }

    /// Dimension M of θ: 2 for BCM-b, N+4 for BCM-S, 2+F for BCM-I,
    /// 3 for BCM-U and BCM-G.
    pub fn dim(&self) -> usize {
        match self.variant {
            Variant::Bcmb => 2,
            Variant::Bcms => self.n_agents as usize + 4,
            Variant::Bcmi => 2 + self.feed_len as usize,
            Variant::Bcmu | Variant::Bcmg => 3,
        }
    }

    /// Number of leading θ components that map to ε thresholds.
    pub fn n_eps(&self) -> usize {
        match self.variant {
            Variant::Bcms => 4,
            _ => 2,
        }
    }

    fn check_dim(&self, theta_len: usize) -> Result<()> {
        if theta_len != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: theta_len,
            });
        }
        Ok(())
    }
}

/// Latent parameters mapped into their constrained domains, with discrete
/// latents replaced by probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedParams {
    pub eps_plus: f64,
    pub eps_minus: f64,
    #[serde(flatten)]
    pub extra: ConstrainedExtra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConstrainedExtra {
    Bcmb,
    Bcms {
        eps_plus_leader: f64,
        eps_minus_leader: f64,
        /// Per-agent posterior probability of being a leader.
        leader_probs: Vec<f64>,
    },
    Bcmi {
        /// Per-position probability that the attention depth K equals
        /// `j + 1`; componentwise sigmoids, not normalized. The density
        /// renormalizes before mixing.
        attention_probs: Vec<f64>,
    },
    Bcmu {
        /// Probability that the backfire switch β is on.
        backfire_prob: f64,
    },
    Bcmg {
        gamma: f64,
    },
}

/// Componentwise map from unconstrained θ to the constrained boxes.
///
/// `ε⁺ = σ(θ)/2 ∈ [0, 0.5]`, `ε⁻ = σ(θ)/2 + 1/2 ∈ [0.5, 1]`, probabilities
/// and γ are plain sigmoids; each component is strictly monotone. For
/// BCM-U the mixture is parameterized by the weight of the no-backfire
/// path, `σ(θ₃)`, so the reported `backfire_prob` is its complement
/// `σ(−θ₃)`.
pub fn transform(theta: &[f64], space: &ParamSpace) -> Result<ConstrainedParams> {
    space.check_dim(theta.len())?;
    let sig = crate::autodiff::sigmoid_f64;
    let params = match space.variant {
        Variant::Bcmb => ConstrainedParams {
            eps_plus: sig(theta[0]) / 2.0,
            eps_minus: sig(theta[1]) / 2.0 + 0.5,
            extra: ConstrainedExtra::Bcmb,
        },
        Variant::Bcms => ConstrainedParams {
            eps_plus: sig(theta[0]) / 2.0,
            eps_minus: sig(theta[2]) / 2.0 + 0.5,
            extra: ConstrainedExtra::Bcms {
                eps_plus_leader: sig(theta[1]) / 2.0,
                eps_minus_leader: sig(theta[3]) / 2.0 + 0.5,
                leader_probs: theta[4..].iter().map(|&t| sig(t)).collect(),
            },
        },
        Variant::Bcmi => ConstrainedParams {
            eps_plus: sig(theta[0]) / 2.0,
            eps_minus: sig(theta[1]) / 2.0 + 0.5,
            extra: ConstrainedExtra::Bcmi {
                attention_probs: theta[2..].iter().map(|&t| sig(t)).collect(),
            },
        },
        Variant::Bcmu => ConstrainedParams {
            eps_plus: sig(theta[0]) / 2.0,
            eps_minus: sig(theta[1]) / 2.0 + 0.5,
            extra: ConstrainedExtra::Bcmu {
                backfire_prob: sig(-theta[2]),
            },
        },
        Variant::Bcmg => ConstrainedParams {
            eps_plus: sig(theta[0]) / 2.0,
            eps_minus: sig(theta[1]) / 2.0 + 0.5,
            extra: ConstrainedExtra::Bcmg {
                gamma: sig(theta[2]),
            },
        },
    };
    Ok(params)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Analytic inverse of [`transform`] on the open boxes.
pub fn inverse_transform(params: &ConstrainedParams, space: &ParamSpace) -> Result<Vec<f64>> {
    let mut theta = Vec::with_capacity(space.dim());
    match (&params.extra, space.variant) {
        (ConstrainedExtra::Bcmb, Variant::Bcmb) => {
            theta.push(logit(2.0 * params.eps_plus));
            theta.push(logit(2.0 * (params.eps_minus - 0.5)));
        }
        (
            ConstrainedExtra::Bcms {
                eps_plus_leader,
                eps_minus_leader,
                leader_probs,
            },
            Variant::Bcms,
        ) => {
            theta.push(logit(2.0 * params.eps_plus));
            theta.push(logit(2.0 * eps_plus_leader));
            theta.push(logit(2.0 * (params.eps_minus - 0.5)));
            theta.push(logit(2.0 * (eps_minus_leader - 0.5)));
            theta.extend(leader_probs.iter().map(|&p| logit(p)));
        }
        (ConstrainedExtra::Bcmi { attention_probs }, Variant::Bcmi) => {
            theta.push(logit(2.0 * params.eps_plus));
            theta.push(logit(2.0 * (params.eps_minus - 0.5)));
            theta.extend(attention_probs.iter().map(|&p| logit(p)));
        }
        (ConstrainedExtra::Bcmu { backfire_prob }, Variant::Bcmu) => {
            theta.push(logit(2.0 * params.eps_plus));
            theta.push(logit(2.0 * (params.eps_minus - 0.5)));
            theta.push(-logit(*backfire_prob));
        }
        (ConstrainedExtra::Bcmg { gamma }, Variant::Bcmg) => {
            theta.push(logit(2.0 * params.eps_plus));
            theta.push(logit(2.0 * (params.eps_minus - 0.5)));
            theta.push(logit(*gamma));
        }
        _ => {
            return Err(CoreError::VariantMismatch(
                "constrained params do not match the parameter space".into(),
            ))
        }
    }
    space.check_dim(theta.len())?;
    Ok(theta)
}

/// `Σᵢ ln |d constrainedᵢ / dθᵢ|`: the log-density (up to the boxes'
/// constant volume) of the flat constrained prior pulled back to θ.
///
/// Each ε component contributes `ln σ(θ) + ln σ(−θ) − ln 2`; probability
/// and γ components contribute `ln σ(θ) + ln σ(−θ)`. Empty θ sums to 0.
pub fn log_jacobian_generic<S: Scalar>(theta: &[S], space: &ParamSpace) -> S {
    assert_eq!(theta.len(), space.dim(), "theta dimension mismatch");
    let n_eps = space.n_eps();
    let mut total = theta[0].constant_like(0.0);
    for (i, &t) in theta.iter().enumerate() {
        let d = t.log_sigmoid() + (-t).log_sigmoid();
        total = total + if i < n_eps { d - std::f64::consts::LN_2 } else { d };
    }
    total
}

/// `f64` front end of [`log_jacobian_generic`] with dimension checking.
pub fn log_jacobian(theta: &[f64], space: &ParamSpace) -> Result<f64> {
    space.check_dim(theta.len())?;
    Ok(log_jacobian_generic(theta, space))
}

/// σ(ρ(ε⁺ − |Δx|)): probability of a positive outcome.
pub fn p_positive<S: Scalar>(eps_plus: S, gap: f64, rho: f64) -> S {
    ((eps_plus - gap) * rho).sigmoid()
}

/// σ(−ρ(ε⁻ − |Δx|)): probability of a negative outcome.
pub fn p_negative<S: Scalar>(eps_minus: S, gap: f64, rho: f64) -> S {
    ((eps_minus - gap) * (-rho)).sigmoid()
}

/// σ(−ρ(γ − |Δx|)): probability that a rewiring-dynamics interaction
/// actually rewires.
pub fn p_rewire<S: Scalar>(gamma: S, gap: f64, rho: f64) -> S {
    ((gamma - gap) * (-rho)).sigmoid()
}

/// Relaxed outcome probabilities for one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub p_plus: f64,
    pub p_minus: f64,
    /// Present for BCM-G events; masked by the dynamics flag like the
    /// update probabilities.
    pub p_rewire: Option<f64>,
}

/// Evaluate the relaxed outcome probabilities at an opinion state.
///
/// Discrete latents are point-resolved from the constrained probabilities
/// (role = leader when its probability exceeds 1/2, attention depth =
/// argmax); the probability-weighted mixtures live in the trajectory
/// density, not here. For BCM-G the dynamics flag masks the off-branch
/// probabilities to zero.
pub fn kappa(
    x: &[f64],
    event: &InteractionEvent,
    params: &ConstrainedParams,
    config: &PgabmConfig,
) -> Kappa {
    let rho = config.rho;
    let (gap, eps_plus, eps_minus) = match &params.extra {
        ConstrainedExtra::Bcmi { attention_probs } => {
            let (feed, target) = event.feed_and_target();
            let k = argmax(attention_probs) + 1;
            let mean = feed[..k].iter().map(|&a| x[a as usize]).sum::<f64>() / k as f64;
            (
                (mean - x[target as usize]).abs(),
                params.eps_plus,
                params.eps_minus,
            )
        }
        ConstrainedExtra::Bcms {
            eps_plus_leader,
            eps_minus_leader,
            leader_probs,
        } => {
            let (u, v) = event.pair();
            let gap = (x[u as usize] - x[v as usize]).abs();
            if leader_probs[v as usize] > 0.5 {
                (gap, *eps_plus_leader, *eps_minus_leader)
            } else {
                (gap, params.eps_plus, params.eps_minus)
            }
        }
        _ => {
            let (u, v) = event.pair();
            (
                (x[u as usize] - x[v as usize]).abs(),
                params.eps_plus,
                params.eps_minus,
            )
        }
    };
    let update_mask = f64::from(event.d == Dynamics::Update);
    match &params.extra {
        ConstrainedExtra::Bcmg { gamma } => Kappa {
            p_plus: p_positive(eps_plus, gap, rho) * update_mask,
            p_minus: p_negative(eps_minus, gap, rho) * update_mask,
            p_rewire: Some(p_rewire(*gamma, gap, rho) * (1.0 - update_mask)),
        },
        _ => Kappa {
            p_plus: p_positive(eps_plus, gap, rho),
            p_minus: p_negative(eps_minus, gap, rho),
            p_rewire: None,
        },
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Floor applied to probabilities before taking logs in the
/// Gumbel-Softmax; zero entries are clamped (and logged) rather than
/// producing `-inf`.
pub const GUMBEL_PROB_FLOOR: f64 = 1e-12;

/// Temperature-τ Gumbel-Softmax relaxation of a categorical draw.
///
/// Given class probabilities and i.i.d. standard Gumbel noise, returns a
/// point on the simplex; its argmax equals `argmax_k (ln p_k + g_k)` for
/// every τ (the Gumbel-max draw), and as τ → 0 the output approaches that
/// one-hot vector.
pub fn gumbel_softmax<S: Scalar>(probs: &[S], tau: f64, noise: &[f64]) -> Vec<S> {
    assert_eq!(probs.len(), noise.len(), "one Gumbel draw per class");
    let logs: Vec<S> = probs
        .iter()
        .map(|&p| {
            if p.value() < GUMBEL_PROB_FLOOR {
                log::warn!(
                    "gumbel_softmax: probability {} clamped to {GUMBEL_PROB_FLOOR}",
                    p.value()
                );
                p.max(p.constant_like(GUMBEL_PROB_FLOOR)).ln()
            } else {
                p.ln()
            }
        })
        .collect();
    gumbel_softmax_from_logits(&logs, tau, noise)
}

/// [`gumbel_softmax`] on unnormalized log-probabilities (no flooring).
pub fn gumbel_softmax_from_logits<S: Scalar>(logits: &[S], tau: f64, noise: &[f64]) -> Vec<S> {
    assert!(!logits.is_empty(), "empty class list");
    assert_eq!(logits.len(), noise.len(), "one Gumbel draw per class");
    let scored: Vec<S> = logits
        .iter()
        .zip(noise)
        .map(|(&l, &g)| (l + g) / tau)
        .collect();
    let lse = log_sum_exp(&scored);
    scored.iter().map(|&a| (a - lse).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{fill_standard_gumbel, stream_rng};

    fn bcmb_space() -> ParamSpace {
        ParamSpace {
            variant: Variant::Bcmb,
            n_agents: 10,
            feed_len: 0,
        }
    }

    #[test]
    fn transform_at_zero_hits_box_centers() {
        let p = transform(&[0.0, 0.0], &bcmb_space()).unwrap();
        assert!((p.eps_plus - 0.25).abs() < 1e-15);
        assert!((p.eps_minus - 0.75).abs() < 1e-15);
    }

    #[test]
    fn transform_limits_and_closed_form() {
        // θ → +∞ pushes ε⁺ to 0.5.
        let p = transform(&[40.0, 0.0], &bcmb_space()).unwrap();
        assert!((p.eps_plus - 0.5).abs() < 1e-9);
        // σ(ln 4) = 0.8, so ε⁺ = 0.4 at θ₁ = 1.3863 (= ln 4 to 5 digits).
        let p = transform(&[1.3863, 0.0], &bcmb_space()).unwrap();
        assert!((p.eps_plus - 0.4).abs() < 1e-4);
    }

    #[test]
    fn transform_checks_dimension() {
        assert!(matches!(
            transform(&[0.0; 3], &bcmb_space()),
            Err(CoreError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn inverse_transform_round_trips() {
        let spaces = [
            ParamSpace { variant: Variant::Bcmb, n_agents: 5, feed_len: 0 },
            ParamSpace { variant: Variant::Bcms, n_agents: 5, feed_len: 0 },
            ParamSpace { variant: Variant::Bcmi, n_agents: 8, feed_len: 4 },
            ParamSpace { variant: Variant::Bcmu, n_agents: 5, feed_len: 0 },
            ParamSpace { variant: Variant::Bcmg, n_agents: 5, feed_len: 0 },
        ];
        let mut rng = stream_rng(5, 0);
        for space in spaces {
            for _ in 0..20 {
                let theta: Vec<f64> = (0..space.dim())
                    .map(|_| 6.0 * (rand::Rng::random::<f64>(&mut rng) - 0.5))
                    .collect();
                let params = transform(&theta, &space).unwrap();
                let back = inverse_transform(&params, &space).unwrap();
                for (a, b) in theta.iter().zip(&back) {
                    assert!((a - b).abs() < 1e-9, "{a} vs {b} ({:?})", space.variant);
                }
            }
        }
    }

    #[test]
    fn log_jacobian_matches_hand_value_and_symmetry() {
        // d/dθ (σ(θ)/2) at 0 is 0.25 · 0.5 = 0.125 per ε component.
        let space = bcmb_space();
        let j = log_jacobian(&[0.0, 0.0], &space).unwrap();
        assert!((j - 2.0 * 0.125f64.ln()).abs() < 1e-12);
        // Pure-sigmoid symmetry: J(θ) == J(−θ).
        let theta = [1.3, -0.4];
        let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
        let a = log_jacobian(&theta, &space).unwrap();
        let b = log_jacobian(&neg, &space).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn kappa_matches_sigmoid_evaluations() {
        // |Δx| = ε⁺ → p⁺ = 1/2.
        assert!((p_positive(0.25, 0.25, 32.0) - 0.5).abs() < 1e-15);
        // ε⁺ = 0.25, |Δx| = 0.15 → σ(3.2) (high-precision reference).
        assert!((p_positive(0.25, 0.15, 32.0) - 0.960834277203236).abs() < 1e-12);
        // ε⁺ = 0.2, |Δx| = 0.56 → σ(−11.52) ≈ 9.93e−6; negligible (≤ 1e−5).
        let p = p_positive(0.2, 0.56, 32.0);
        assert!((p - 9.929405711774312e-6).abs() < 1e-12);
        assert!(p <= 1e-5);
    }

    #[test]
    fn kappa_event_masks_by_dynamics_flag() {
        let params = ConstrainedParams {
            eps_plus: 0.25,
            eps_minus: 0.75,
            extra: ConstrainedExtra::Bcmg { gamma: 0.4 },
        };
        let x = [0.9, 0.2];
        let mk = |d| InteractionEvent {
            step: 0,
            participants: vec![0, 1],
            d,
            s_plus: false,
            s_minus: false,
            s_rewire: false,
        };
        let cfg = PgabmConfig::default();
        let update = kappa(&x, &mk(Dynamics::Update), &params, &cfg);
        assert_eq!(update.p_rewire, Some(0.0));
        assert!(update.p_minus > 0.0);
        let rewire = kappa(&x, &mk(Dynamics::Rewire), &params, &cfg);
        assert_eq!((rewire.p_plus, rewire.p_minus), (0.0, 0.0));
        // gap 0.7 > γ = 0.4: rewire probability σ(32·0.3) ≈ 1.
        assert!(rewire.p_rewire.unwrap() > 0.9999);
    }

    #[test]
    fn gumbel_softmax_lands_on_simplex_and_keeps_argmax() {
        let mut rng = stream_rng(3, 0);
        let probs = vec![0.2, 0.3, 0.5];
        let mut noise = [0.0; 3];
        for _ in 0..200 {
            fill_standard_gumbel(&mut rng, &mut noise);
            let y = gumbel_softmax(&probs, 0.5, &noise);
            let total: f64 = y.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let scored: Vec<f64> = probs.iter().zip(&noise).map(|(p, g)| p.ln() + g).collect();
            assert_eq!(argmax(&y), argmax(&scored));
        }
    }

    #[test]
    fn gumbel_softmax_one_hot_probs_pin_the_argmax() {
        let probs = vec![0.0, 1.0, 0.0];
        let mut rng = stream_rng(8, 0);
        let mut noise = [0.0; 3];
        for _ in 0..100 {
            fill_standard_gumbel(&mut rng, &mut noise);
            let y = gumbel_softmax(&probs, 0.1, &noise);
            assert_eq!(argmax(&y), 1);
        }
    }

    #[test]
    fn gumbel_softmax_low_temperature_saturates() {
        // Two classes with a post-noise logit gap of 5 at τ = 0.1: the
        // soft output is σ(50) away from one-hot.
        let logits = [5.0f64, 0.0];
        let y = gumbel_softmax_from_logits(&logits, 0.1, &[0.0, 0.0]);
        assert!(y[0] > 0.99);
        assert!((y[0] + y[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gumbel_max_draws_follow_the_categorical() {
        // Chi-square goodness of fit on the hard argmax of the softmax
        // output; 20k draws, df = 2, α = 0.001 critical value 13.8155.
        let probs = vec![0.2, 0.3, 0.5];
        let mut rng = stream_rng(17, 0);
        let mut noise = [0.0; 3];
        let n = 20_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            fill_standard_gumbel(&mut rng, &mut noise);
            let y = gumbel_softmax(&probs, 0.1, &noise);
            counts[argmax(&y)] += 1;
        }
        let chi2: f64 = probs
            .iter()
            .zip(&counts)
            .map(|(&p, &c)| {
                let e = p * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 13.815510557964274, "chi2 = {chi2}");
    }
}

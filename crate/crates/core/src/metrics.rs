//! Scoring estimates against ground truth.
//!
//! Point estimates come from posterior-sample means: continuous
//! parameters average directly; discrete latents use their probability
//! representation (role = mean leader probability thresholded at 1/2,
//! attention depth = argmax of the mean probability vector, backfire =
//! mean probability scored on the probability scale).
//!
//! For the role variant the leader and follower labels are only
//! identified up to a swap; estimates are canonicalized to the ordering
//! `ε⁺_F ≥ ε⁺_L` (equivalently `ε⁻_F ≤ ε⁻_L`) before scoring, flipping
//! the role probabilities along with the thresholds when needed.

use serde::{Deserialize, Serialize};

use crate::abm::{LatentParams, Variant, VariantLatents};
use crate::error::CoreError;
use crate::pgabm::{ConstrainedExtra, ConstrainedParams};
use crate::svi::{Method, PosteriorSamples};
use crate::Result;

/// Root mean squared error between two equal-length vectors.
pub fn rmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.is_empty() || estimates.len() != truths.len() {
        return Err(CoreError::DimensionMismatch {
            expected: truths.len().max(1),
            got: estimates.len(),
        });
    }
    let ms = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e - t) * (e - t))
        .sum::<f64>()
        / estimates.len() as f64;
    Ok(ms.sqrt())
}

/// Fraction of agents whose thresholded role probability disagrees with
/// the true role.
pub fn role_error_rate(leader_probs: &[f64], roles: &[bool]) -> Result<f64> {
    if leader_probs.len() != roles.len() {
        return Err(CoreError::DimensionMismatch {
            expected: roles.len(),
            got: leader_probs.len(),
        });
    }
    let wrong = leader_probs
        .iter()
        .zip(roles)
        .filter(|(p, r)| (**p > 0.5) != **r)
        .count();
    Ok(wrong as f64 / roles.len() as f64)
}

/// `|K̂ − K| / F`.
pub fn relative_k_error(k_hat: u32, k_true: u32, feed_len: u32) -> f64 {
    f64::from(k_hat.abs_diff(k_true)) / f64::from(feed_len)
}

/// Probability-scale error on the backfire switch: `|φ − 1[β]|`.
pub fn beta_error(backfire_prob: f64, beta_true: bool) -> f64 {
    (backfire_prob - f64::from(beta_true)).abs()
}

/// Componentwise mean of posterior samples in the constrained space.
pub fn posterior_mean(samples: &PosteriorSamples) -> Result<ConstrainedParams> {
    let first = samples
        .samples
        .first()
        .ok_or_else(|| CoreError::Invalid("empty posterior sample set".into()))?;
    let n = samples.samples.len() as f64;
    let mean_of = |f: &dyn Fn(&ConstrainedParams) -> f64| {
        samples.samples.iter().map(f).sum::<f64>() / n
    };
    let extra = match &first.extra {
        ConstrainedExtra::Bcmb => ConstrainedExtra::Bcmb,
        ConstrainedExtra::Bcms { leader_probs, .. } => {
            let dim = leader_probs.len();
            let mut probs = vec![0.0; dim];
            for s in &samples.samples {
                match &s.extra {
                    ConstrainedExtra::Bcms { leader_probs, .. } => {
                        for (acc, p) in probs.iter_mut().zip(leader_probs) {
                            *acc += p;
                        }
                    }
                    _ => return Err(CoreError::Invalid("mixed posterior payloads".into())),
                }
            }
            for p in &mut probs {
                *p /= n;
            }
            ConstrainedExtra::Bcms {
                eps_plus_leader: mean_of(&|s| match &s.extra {
                    ConstrainedExtra::Bcms { eps_plus_leader, .. } => *eps_plus_leader,
                    _ => f64::NAN,
                }),
                eps_minus_leader: mean_of(&|s| match &s.extra {
                    ConstrainedExtra::Bcms { eps_minus_leader, .. } => *eps_minus_leader,
                    _ => f64::NAN,
                }),
                leader_probs: probs,
            }
        }
        ConstrainedExtra::Bcmi { attention_probs } => {
            let dim = attention_probs.len();
            let mut probs = vec![0.0; dim];
            for s in &samples.samples {
                match &s.extra {
                    ConstrainedExtra::Bcmi { attention_probs } => {
                        for (acc, p) in probs.iter_mut().zip(attention_probs) {
                            *acc += p;
                        }
                    }
                    _ => return Err(CoreError::Invalid("mixed posterior payloads".into())),
                }
            }
            for p in &mut probs {
                *p /= n;
            }
            ConstrainedExtra::Bcmi {
                attention_probs: probs,
            }
        }
        ConstrainedExtra::Bcmu { .. } => ConstrainedExtra::Bcmu {
            backfire_prob: mean_of(&|s| match &s.extra {
                ConstrainedExtra::Bcmu { backfire_prob } => *backfire_prob,
                _ => f64::NAN,
            }),
        },
        ConstrainedExtra::Bcmg { .. } => ConstrainedExtra::Bcmg {
            gamma: mean_of(&|s| match &s.extra {
                ConstrainedExtra::Bcmg { gamma } => *gamma,
                _ => f64::NAN,
            }),
        },
    };
    let mut mean = ConstrainedParams {
        eps_plus: mean_of(&|s| s.eps_plus),
        eps_minus: mean_of(&|s| s.eps_minus),
        extra,
    };
    canonicalize_roles(&mut mean);
    Ok(mean)
}

/// Resolve the leader/follower label symmetry: if the estimated
/// thresholds violate `ε⁺_F ≥ ε⁺_L`, swap the labels and flip the role
/// probabilities.
fn canonicalize_roles(params: &mut ConstrainedParams) {
    if let ConstrainedExtra::Bcms {
        eps_plus_leader,
        eps_minus_leader,
        leader_probs,
    } = &mut params.extra
    {
        if params.eps_plus < *eps_plus_leader {
            std::mem::swap(&mut params.eps_plus, eps_plus_leader);
            std::mem::swap(&mut params.eps_minus, eps_minus_leader);
            for p in leader_probs.iter_mut() {
                *p = 1.0 - *p;
            }
        }
    }
}

/// One scored parameter of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamScore {
    pub name: String,
    pub truth: f64,
    pub estimate: f64,
    pub error: f64,
}

/// Score a posterior against the generating latents.
///
/// Emitted rows per variant: the ε components (absolute errors); BCM-S
/// adds a `roles` row (truth = leader fraction, estimate = predicted
/// leader fraction, error = role error rate); BCM-I adds `k_attend`
/// (error = |K̂ − K|/F); BCM-U adds `beta` (probability-scale error);
/// BCM-G adds `gamma`.
pub fn score(
    truth: &LatentParams,
    samples: &PosteriorSamples,
    feed_len: u32,
) -> Result<Vec<ParamScore>> {
    let mean = posterior_mean(samples)?;
    let mut rows = vec![
        ParamScore {
            name: "eps_plus".into(),
            truth: truth.eps_plus,
            estimate: mean.eps_plus,
            error: (mean.eps_plus - truth.eps_plus).abs(),
        },
        ParamScore {
            name: "eps_minus".into(),
            truth: truth.eps_minus,
            estimate: mean.eps_minus,
            error: (mean.eps_minus - truth.eps_minus).abs(),
        },
    ];
    match (&truth.extra, &mean.extra) {
        (VariantLatents::Bcmb, ConstrainedExtra::Bcmb) => {}
        (
            VariantLatents::Bcms {
                eps_plus_leader,
                eps_minus_leader,
                roles,
            },
            ConstrainedExtra::Bcms {
                eps_plus_leader: est_pl,
                eps_minus_leader: est_ml,
                leader_probs,
            },
        ) => {
            rows.push(ParamScore {
                name: "eps_plus_leader".into(),
                truth: *eps_plus_leader,
                estimate: *est_pl,
                error: (est_pl - eps_plus_leader).abs(),
            });
            rows.push(ParamScore {
                name: "eps_minus_leader".into(),
                truth: *eps_minus_leader,
                estimate: *est_ml,
                error: (est_ml - eps_minus_leader).abs(),
            });
            let true_frac =
                roles.iter().filter(|&&r| r).count() as f64 / roles.len() as f64;
            let est_frac = leader_probs.iter().filter(|&&p| p > 0.5).count() as f64
                / leader_probs.len() as f64;
            rows.push(ParamScore {
                name: "roles".into(),
                truth: true_frac,
                estimate: est_frac,
                error: role_error_rate(leader_probs, roles)?,
            });
        }
        (
            VariantLatents::Bcmi { k_attend },
            ConstrainedExtra::Bcmi { attention_probs },
        ) => {
            let k_hat = crate::pgabm::argmax(attention_probs) as u32 + 1;
            rows.push(ParamScore {
                name: "k_attend".into(),
                truth: f64::from(*k_attend),
                estimate: f64::from(k_hat),
                error: relative_k_error(k_hat, *k_attend, feed_len),
            });
        }
        (VariantLatents::Bcmu { backfire }, ConstrainedExtra::Bcmu { backfire_prob }) => {
            rows.push(ParamScore {
                name: "beta".into(),
                truth: f64::from(*backfire),
                estimate: *backfire_prob,
                error: beta_error(*backfire_prob, *backfire),
            });
        }
        (VariantLatents::Bcmg { gamma }, ConstrainedExtra::Bcmg { gamma: est }) => {
            rows.push(ParamScore {
                name: "gamma".into(),
                truth: *gamma,
                estimate: *est,
                error: (est - gamma).abs(),
            });
        }
        _ => {
            return Err(CoreError::VariantMismatch(
                "posterior payload does not match ground truth variant".into(),
            ))
        }
    }
    Ok(rows)
}

/// Experiment completion status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Timeout,
    Failed,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunStatus::Ok => "ok",
            RunStatus::Timeout => "timeout",
            RunStatus::Failed => "failed",
        })
    }
}

/// Result of one method on one experiment cell.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub variant: Variant,
    pub method: Method,
    pub ground_truth: LatentParams,
    pub posterior_mean: Option<ConstrainedParams>,
    pub scores: Vec<ParamScore>,
    pub wall_time_s: f64,
    pub status: RunStatus,
}

/// One row of the results CSV. Field order is the schema:
/// `variant, method, seed, t, n, f, xi, leader_frac, param_name, truth,
/// estimate, error, wall_time_s, status`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub variant: String,
    pub method: String,
    pub seed: u64,
    pub t: u32,
    pub n: u32,
    pub f: Option<u32>,
    pub xi: Option<f64>,
    pub leader_frac: Option<f64>,
    pub param_name: String,
    pub truth: Option<f64>,
    pub estimate: Option<f64>,
    pub error: Option<f64>,
    pub wall_time_s: f64,
    pub status: String,
}

/// Canonical results CSV header.
pub const RESULT_HEADER: [&str; 14] = [
    "variant",
    "method",
    "seed",
    "t",
    "n",
    "f",
    "xi",
    "leader_frac",
    "param_name",
    "truth",
    "estimate",
    "error",
    "wall_time_s",
    "status",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_matches_hand_values() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        // (0,0) vs (3,4): mean square (9+16)/2 = 12.5.
        let v = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((rmse(&[0.3], &[0.25]).unwrap() - 0.05).abs() < 1e-12);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn role_error_rate_thresholds_at_half() {
        let roles = vec![true, false, true, false];
        assert_eq!(
            role_error_rate(&[0.9, 0.1, 0.8, 0.2], &roles).unwrap(),
            0.0
        );
        // All just below 1/2 against all-leader truth → rate 1.
        assert_eq!(
            role_error_rate(&[0.49; 4], &[true, true, true, true]).unwrap(),
            1.0
        );
        assert_eq!(
            role_error_rate(&[0.9, 0.1, 0.2, 0.2], &roles).unwrap(),
            0.25
        );
        assert!(role_error_rate(&[0.5], &roles).is_err());
    }

    #[test]
    fn role_error_is_permutation_invariant() {
        let probs = [0.9, 0.2, 0.7, 0.1, 0.6];
        let roles = [true, false, false, false, true];
        let base = role_error_rate(&probs, &roles).unwrap();
        let perm = [4usize, 2, 0, 3, 1];
        let p2: Vec<f64> = perm.iter().map(|&i| probs[i]).collect();
        let r2: Vec<bool> = perm.iter().map(|&i| roles[i]).collect();
        assert_eq!(base, role_error_rate(&p2, &r2).unwrap());
    }

    #[test]
    fn discrete_errors_match_definitions() {
        assert_eq!(relative_k_error(4, 4, 10), 0.0);
        assert_eq!(relative_k_error(1, 10, 10), 0.9);
        assert!((relative_k_error(3, 5, 10) - 0.2).abs() < 1e-15);
        assert_eq!(beta_error(1.0, true), 0.0);
        assert_eq!(beta_error(0.0, true), 1.0);
        assert!((beta_error(0.3, false) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rmse_triangle_inequality_on_random_fixtures() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(2, 0);
        for _ in 0..200 {
            let n = rng.random_range(1..6);
            let draw = |r: &mut rand_chacha::ChaCha20Rng| -> Vec<f64> {
                (0..n).map(|_| r.random::<f64>()).collect()
            };
            let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let ab = rmse(&a, &b).unwrap();
            let bc = rmse(&b, &c).unwrap();
            let ac = rmse(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    fn samples_of(params: Vec<ConstrainedParams>) -> PosteriorSamples {
        PosteriorSamples {
            samples: params,
            source: Method::Svi,
        }
    }

    #[test]
    fn posterior_mean_averages_components() {
        let mk = |e: f64| ConstrainedParams {
            eps_plus: e,
            eps_minus: 0.8,
            extra: ConstrainedExtra::Bcmu { backfire_prob: e },
        };
        let mean = posterior_mean(&samples_of(vec![mk(0.1), mk(0.3)])).unwrap();
        assert!((mean.eps_plus - 0.2).abs() < 1e-15);
        match mean.extra {
            ConstrainedExtra::Bcmu { backfire_prob } => {
                assert!((backfire_prob - 0.2).abs() < 1e-15)
            }
            _ => panic!(),
        }
        assert!(posterior_mean(&samples_of(vec![])).is_err());
    }

    #[test]
    fn label_switched_roles_are_canonicalized_before_scoring() {
        // Estimate landed in the swapped mode: leader thresholds carry the
        // follower values and the role probabilities are complemented.
        let swapped = ConstrainedParams {
            eps_plus: 0.15, // "follower" slot holds the leader value
            eps_minus: 0.85,
            extra: ConstrainedExtra::Bcms {
                eps_plus_leader: 0.35,
                eps_minus_leader: 0.65,
                leader_probs: vec![0.1, 0.9, 0.9],
            },
        };
        let truth = LatentParams::bcms((0.35, 0.15, 0.65, 0.85), vec![true, false, false]);
        let rows = score(&truth, &samples_of(vec![swapped]), 0).unwrap();
        let by_name = |n: &str| rows.iter().find(|r| r.name == n).unwrap().clone();
        assert!((by_name("eps_plus").estimate - 0.35).abs() < 1e-12);
        assert!((by_name("eps_plus_leader").estimate - 0.15).abs() < 1e-12);
        assert_eq!(by_name("roles").error, 0.0);
    }

    #[test]
    fn score_emits_variant_rows() {
        let truth = LatentParams::bcmi(0.3, 0.7, 4);
        let est = ConstrainedParams {
            eps_plus: 0.28,
            eps_minus: 0.74,
            extra: ConstrainedExtra::Bcmi {
                attention_probs: vec![0.1, 0.1, 0.2, 0.5, 0.1],
            },
        };
        let rows = score(&truth, &samples_of(vec![est]), 5).unwrap();
        assert_eq!(rows.len(), 3);
        let k = rows.iter().find(|r| r.name == "k_attend").unwrap();
        assert_eq!(k.estimate, 4.0);
        assert_eq!(k.error, 0.0);

        // Mismatched payloads error out.
        let wrong = ConstrainedParams {
            eps_plus: 0.2,
            eps_minus: 0.8,
            extra: ConstrainedExtra::Bcmb,
        };
        assert!(score(&truth, &samples_of(vec![wrong]), 5).is_err());
    }
}

//! Deterministic opinion replay.
//!
//! Given observed outcomes, initial opinions, and the update rates, the
//! opinion path is a deterministic function of the data — no thresholds
//! involved: the recorded `s⁺`/`s⁻` flags select the update branch, so the
//! path can be reconstructed for any hypothesis about the discrete latents
//! (attention depth, backfire switch, roles). The trajectory densities
//! precompute these paths once per hypothesis and treat the resulting
//! per-event gaps as constants with respect to θ.

use crate::abm::{Dynamics, Trajectory, Variant};
use crate::error::CoreError;
use crate::Result;

/// Hypothesis about discrete latents under which opinions are replayed.
#[derive(Debug, Clone, Copy)]
pub enum ReplayHypothesis<'a> {
    /// No discrete latent affects the path (BCM-b, BCM-G).
    Plain,
    /// BCM-S with known roles; uses role-specific update rates.
    Roles(&'a [bool]),
    /// BCM-S with unknown roles: every agent replays at the follower
    /// rates. Exact when leader and follower rates coincide (the setting
    /// inference requires; see [`TrajectoryDensity`](super::TrajectoryDensity)).
    FollowerRates,
    /// BCM-I attention-depth hypothesis `K`.
    Attention(u32),
    /// BCM-U backfire hypothesis `β`.
    Backfire(bool),
}

/// Opinion path summary produced by [`replay_opinions`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTrace {
    /// Signed source-minus-target gap per event, measured on the
    /// pre-update state (the quantity the outcome probabilities read).
    pub deltas: Vec<f64>,
    /// Target agent's opinion after each event.
    pub target_after: Vec<f64>,
    /// Final opinion vector.
    pub x_final: Vec<f64>,
}

fn hypothesis_matches(variant: Variant, hyp: &ReplayHypothesis<'_>) -> bool {
    matches!(
        (variant, hyp),
        (Variant::Bcmb, ReplayHypothesis::Plain)
            | (Variant::Bcmg, ReplayHypothesis::Plain)
            | (Variant::Bcms, ReplayHypothesis::Roles(_))
            | (Variant::Bcms, ReplayHypothesis::FollowerRates)
            | (Variant::Bcmi, ReplayHypothesis::Attention(_))
            | (Variant::Bcmu, ReplayHypothesis::Backfire(_))
    )
}

/// Replay the opinion path of a trajectory under a latent hypothesis.
///
/// Observed outcome flags choose the branch; when both `s⁺` and `s⁻` are
/// set (possible in relaxed-model data, never in simulator output) both
/// updates apply additively before the single clamp.
pub fn replay_opinions(traj: &Trajectory, hyp: ReplayHypothesis<'_>) -> Result<ReplayTrace> {
    if !hypothesis_matches(traj.config.variant, &hyp) {
        return Err(CoreError::VariantMismatch(format!(
            "replay hypothesis {hyp:?} does not fit variant {}",
            traj.config.variant
        )));
    }
    if let ReplayHypothesis::Roles(roles) = hyp {
        if roles.len() != traj.config.n_agents as usize {
            return Err(CoreError::Config(format!(
                "roles length {} != n_agents {}",
                roles.len(),
                traj.config.n_agents
            )));
        }
    }
    if let ReplayHypothesis::Attention(k) = hyp {
        let f = traj.config.feed_len.unwrap_or(0);
        if k < 1 || k > f {
            return Err(CoreError::Config(format!(
                "attention depth {k} outside [1, {f}]"
            )));
        }
    }

    let config = &traj.config;
    let mut x = traj.x0.clone();
    let mut deltas = Vec::with_capacity(traj.events.len());
    let mut target_after = Vec::with_capacity(traj.events.len());

    for event in &traj.events {
        let (delta, v) = match hyp {
            ReplayHypothesis::Attention(k) => {
                let (feed, target) = event.feed_and_target();
                let k = k as usize;
                let mean = feed[..k].iter().map(|&a| x[a as usize]).sum::<f64>() / k as f64;
                (mean - x[target as usize], target)
            }
            _ => {
                let (u, v) = event.pair();
                (x[u as usize] - x[v as usize], v)
            }
        };
        deltas.push(delta);

        if event.d == Dynamics::Update {
            let (mu_plus, mu_minus) = match hyp {
                ReplayHypothesis::Roles(roles) if roles[v as usize] => {
                    (config.mu_plus_l(), config.mu_minus_l())
                }
                _ => (config.mu_plus, config.mu_minus),
            };
            let backfire = match hyp {
                ReplayHypothesis::Backfire(b) => f64::from(b),
                _ => 1.0,
            };
            let xv = &mut x[v as usize];
            if event.s_plus {
                *xv += mu_plus * delta;
            }
            if event.s_minus {
                *xv -= backfire * mu_minus * delta;
            }
            *xv = xv.clamp(0.0, 1.0);
        }
        target_after.push(x[v as usize]);
    }

    Ok(ReplayTrace {
        deltas,
        target_after,
        x_final: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abm::{simulate, LatentParams, ModelConfig, Variant};

    #[test]
    fn replay_outcomes_match_hard_thresholds() {
        // Re-evaluating the hard rule on the replayed state must reproduce
        // the recorded outcome of every event: replay and simulator share
        // the same recurrence.
        let config = ModelConfig::new(Variant::Bcmb, 12, 20, 42);
        let latents = LatentParams::bcmb(0.3, 0.7);
        let traj = simulate(&config, &latents).unwrap();
        let trace = replay_opinions(&traj, ReplayHypothesis::Plain).unwrap();
        for (event, delta) in traj.events.iter().zip(&trace.deltas) {
            let gap = delta.abs();
            assert_eq!(event.s_plus, gap <= latents.eps_plus);
            assert_eq!(event.s_minus, gap >= latents.eps_minus);
        }
        assert!(trace.x_final.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn bcms_replay_with_roles_matches_thresholds_under_distinct_rates() {
        let config = ModelConfig::new(Variant::Bcms, 10, 25, 7)
            .with_mu(0.08, 0.08)
            .with_leader_mu(0.02, 0.02);
        let roles: Vec<bool> = (0..10).map(|i| i % 4 == 0).collect();
        let latents = LatentParams::bcms((0.35, 0.15, 0.65, 0.85), roles.clone());
        let traj = simulate(&config, &latents).unwrap();
        let trace = replay_opinions(&traj, ReplayHypothesis::Roles(&roles)).unwrap();
        for (event, delta) in traj.events.iter().zip(&trace.deltas) {
            let (_, v) = event.pair();
            let (ep, em) = if roles[v as usize] {
                (0.15, 0.85)
            } else {
                (0.35, 0.65)
            };
            let gap = delta.abs();
            assert_eq!(event.s_plus, gap <= ep, "event {event:?}");
            assert_eq!(event.s_minus, gap >= em);
        }
    }

    #[test]
    fn bcmu_beta_paths_differ_only_on_negative_events() {
        let config = ModelConfig::new(Variant::Bcmu, 10, 30, 3).with_mu(0.1, 0.1);
        let latents = LatentParams::bcmu(0.25, 0.75, true);
        let traj = simulate(&config, &latents).unwrap();
        assert!(traj.events.iter().any(|e| e.s_minus), "fixture needs backfire events");

        // β = 0 path: negative events leave the target unchanged.
        let off = replay_opinions(&traj, ReplayHypothesis::Backfire(false)).unwrap();
        let mut x = traj.x0.clone();
        for (event, after) in traj.events.iter().zip(&off.target_after) {
            let (u, v) = event.pair();
            if event.s_minus && !event.s_plus {
                assert_eq!(x[v as usize], *after);
            }
            if event.s_plus {
                let d = x[u as usize] - x[v as usize];
                x[v as usize] = (x[v as usize] + 0.1 * d).clamp(0.0, 1.0);
            }
            assert_eq!(x[v as usize], *after);
        }

        // β = 1 path reproduces the generating simulator exactly.
        let on = replay_opinions(&traj, ReplayHypothesis::Backfire(true)).unwrap();
        for (event, delta) in traj.events.iter().zip(&on.deltas) {
            assert_eq!(event.s_plus, delta.abs() <= 0.25);
            assert_eq!(event.s_minus, delta.abs() >= 0.75);
        }
    }

    #[test]
    fn zero_rate_replay_freezes_positive_events() {
        let config = ModelConfig::new(Variant::Bcmb, 8, 10, 11).with_mu(0.0, 0.0);
        let latents = LatentParams::bcmb(0.3, 0.7);
        let traj = simulate(&config, &latents).unwrap();
        let trace = replay_opinions(&traj, ReplayHypothesis::Plain).unwrap();
        assert_eq!(trace.x_final, traj.x0);
    }

    #[test]
    fn bcmi_replay_uses_hypothesis_depth() {
        let config = ModelConfig::new(Variant::Bcmi, 12, 15, 9).with_feed_len(5);
        let latents = LatentParams::bcmi(0.3, 0.7, 3);
        let traj = simulate(&config, &latents).unwrap();
        // Replay under the true K reproduces the recorded outcomes.
        let trace = replay_opinions(&traj, ReplayHypothesis::Attention(3)).unwrap();
        for (event, delta) in traj.events.iter().zip(&trace.deltas) {
            assert_eq!(event.s_plus, delta.abs() <= 0.3);
            assert_eq!(event.s_minus, delta.abs() >= 0.7);
        }
        // A wrong K yields a different path on this fixture.
        let other = replay_opinions(&traj, ReplayHypothesis::Attention(1)).unwrap();
        assert_ne!(trace.deltas, other.deltas);
        // Out-of-range K is rejected.
        assert!(replay_opinions(&traj, ReplayHypothesis::Attention(6)).is_err());
    }

    #[test]
    fn mismatched_hypotheses_are_rejected() {
        let config = ModelConfig::new(Variant::Bcmb, 4, 2, 0);
        let traj = simulate(&config, &LatentParams::bcmb(0.3, 0.7)).unwrap();
        assert!(replay_opinions(&traj, ReplayHypothesis::Backfire(true)).is_err());
        assert!(replay_opinions(&traj, ReplayHypothesis::Attention(1)).is_err());
    }
}

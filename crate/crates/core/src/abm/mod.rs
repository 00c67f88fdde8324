//! Forward simulators for the bounded-confidence model with backfire and
//! its four extensions.
//!
//! Opinions live in `[0, 1]`. At each interaction a target agent `v` is
//! exposed to a source opinion (a single neighbor, or the mean of the
//! first `K` entries of a feed). With `Δx` the source-minus-target gap:
//!
//! * `|Δx| ≤ ε⁺` — positive outcome, `x_v ← x_v + μ⁺ Δx` (convergence);
//! * `|Δx| ≥ ε⁻` — negative outcome, `x_v ← x_v − μ⁻ Δx` (backfire);
//! * otherwise — neutral, no movement.
//!
//! The updated opinion is clamped to `[0, 1]` once per event. Variants
//! modulate this rule: BCM-S selects `(ε, μ)` by the target's role,
//! BCM-U multiplies the backfire update by a global binary switch, and
//! BCM-G replaces a fraction of interactions with degree-preserving link
//! rewiring on an Erdős–Rényi graph.
//!
//! Simulations are reproducible: all randomness derives from the config
//! seed via the stream scheme in [`crate::rng`], one sub-stream per time
//! step, so trajectories are byte-identical across runs and platforms.

pub mod graph;
mod io;

pub use io::{read_trajectory, read_trajectory_file, trajectory_bytes, write_trajectory, write_trajectory_file};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::rng::{stream_rng, DistinctSampler, STREAM_GRAPH, STREAM_STEP_BASE, STREAM_X0};
use crate::Result;
use graph::{init_graph, sample_rewire, Graph};

/// Model family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Baseline bounded-confidence model with backfire.
    Bcmb,
    /// Structural rule: leader/follower roles.
    Bcms,
    /// Interaction rule: feed of `F` agents, attention depth `K`.
    Bcmi,
    /// Update rule: global backfire switch `β`.
    Bcmu,
    /// Graph rule: link rewiring with threshold `γ`.
    Bcmg,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Bcmb,
        Variant::Bcms,
        Variant::Bcmi,
        Variant::Bcmu,
        Variant::Bcmg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Bcmb => "bcmb",
            Variant::Bcms => "bcms",
            Variant::Bcmi => "bcmi",
            Variant::Bcmu => "bcmu",
            Variant::Bcmg => "bcmg",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bcmb" | "bcm-b" => Ok(Variant::Bcmb),
            "bcms" | "bcm-s" => Ok(Variant::Bcms),
            "bcmi" | "bcm-i" => Ok(Variant::Bcmi),
            "bcmu" | "bcm-u" => Ok(Variant::Bcmu),
            "bcmg" | "bcm-g" => Ok(Variant::Bcmg),
            other => Err(CoreError::Config(format!("unknown variant '{other}'"))),
        }
    }
}

/// Observed model parameters: everything the inference methods may assume
/// known. Latent quantities live in [`LatentParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub n_agents: u32,
    pub n_steps: u32,
    pub interactions_per_step: u32,
    /// Convergence rate μ⁺ (follower rate in BCM-S).
    pub mu_plus: f64,
    /// Divergence rate μ⁻ (follower rate in BCM-S).
    pub mu_minus: f64,
    /// Leader convergence rate μ⁺_L (BCM-S only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_plus_leader: Option<f64>,
    /// Leader divergence rate μ⁻_L (BCM-S only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_minus_leader: Option<f64>,
    /// Feed length F (BCM-I only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feed_len: Option<u32>,
    /// Probability of update dynamics per interaction (BCM-G only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    /// Erdős–Rényi density (BCM-G only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_density: Option<f64>,
    pub seed: u64,
}

impl ModelConfig {
    /// Baseline config: μ⁺ = μ⁻ = 0.02 and 10 interactions per step.
    pub fn new(variant: Variant, n_agents: u32, n_steps: u32, seed: u64) -> Self {
        Self {
            variant,
            n_agents,
            n_steps,
            interactions_per_step: 10,
            mu_plus: 0.02,
            mu_minus: 0.02,
            mu_plus_leader: None,
            mu_minus_leader: None,
            feed_len: None,
            xi: None,
            graph_density: match variant {
                Variant::Bcmg => Some(0.1),
                _ => None,
            },
            seed,
        }
    }

    pub fn with_mu(mut self, mu_plus: f64, mu_minus: f64) -> Self {
        self.mu_plus = mu_plus;
        self.mu_minus = mu_minus;
        self
    }

    pub fn with_interactions_per_step(mut self, k: u32) -> Self {
        self.interactions_per_step = k;
        self
    }

    pub fn with_feed_len(mut self, f: u32) -> Self {
        self.feed_len = Some(f);
        self
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = Some(xi);
        self
    }

    /// Leader rates for BCM-S (follower rates stay `mu_plus`/`mu_minus`).
    pub fn with_leader_mu(mut self, mu_plus_leader: f64, mu_minus_leader: f64) -> Self {
        self.mu_plus_leader = Some(mu_plus_leader);
        self.mu_minus_leader = Some(mu_minus_leader);
        self
    }

    /// Effective leader convergence rate (defaults to the follower rate).
    pub fn mu_plus_l(&self) -> f64 {
        self.mu_plus_leader.unwrap_or(self.mu_plus)
    }

    /// Effective leader divergence rate (defaults to the follower rate).
    pub fn mu_minus_l(&self) -> f64 {
        self.mu_minus_leader.unwrap_or(self.mu_minus)
    }

    pub fn n_events(&self) -> usize {
        self.n_steps as usize * self.interactions_per_step as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CoreError::Config(msg));
        if self.n_agents < 2 {
            return fail(format!("n_agents must be >= 2, got {}", self.n_agents));
        }
        if self.n_steps < 1 {
            return fail("n_steps must be >= 1".into());
        }
        if self.interactions_per_step < 1 {
            return fail("interactions_per_step must be >= 1".into());
        }
        for (name, mu) in [("mu_plus", self.mu_plus), ("mu_minus", self.mu_minus)] {
            if !(0.0..=1.0).contains(&mu) {
                return fail(format!("{name} must be in [0,1], got {mu}"));
            }
        }
        match self.variant {
            Variant::Bcms => {
                let (mp_l, mm_l) = (self.mu_plus_l(), self.mu_minus_l());
                if !(0.0..=1.0).contains(&mp_l) || !(0.0..=1.0).contains(&mm_l) {
                    return fail("leader rates must be in [0,1]".into());
                }
                // Follower rates dominate leader rates.
                if self.mu_plus < mp_l || self.mu_minus < mm_l {
                    return fail(format!(
                        "follower rates must dominate leader rates: μ⁺={} vs μ⁺_L={mp_l}, μ⁻={} vs μ⁻_L={mm_l}",
                        self.mu_plus, self.mu_minus
                    ));
                }
            }
            Variant::Bcmi => {
                let f = self
                    .feed_len
                    .ok_or_else(|| CoreError::Config("BCM-I requires feed_len".into()))?;
                if f < 2 {
                    return fail(format!("feed_len must be >= 2, got {f}"));
                }
                if self.n_agents <= f {
                    return fail(format!(
                        "BCM-I samples F+1 distinct agents; need n_agents > feed_len ({} <= {f})",
                        self.n_agents
                    ));
                }
            }
            Variant::Bcmg => {
                let xi = self
                    .xi
                    .ok_or_else(|| CoreError::Config("BCM-G requires xi".into()))?;
                if !(0.0..=1.0).contains(&xi) {
                    return fail(format!("xi must be in [0,1], got {xi}"));
                }
                let d = self.graph_density.unwrap_or(0.1);
                if !(d > 0.0 && d <= 1.0) {
                    return fail(format!("graph_density must be in (0,1], got {d}"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Ground-truth (or hypothesized) latent parameters of one model instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentParams {
    /// Confidence threshold ε⁺ ∈ [0, 0.5] (follower threshold in BCM-S).
    pub eps_plus: f64,
    /// Backfire threshold ε⁻ ∈ [0.5, 1] (follower threshold in BCM-S).
    pub eps_minus: f64,
    #[serde(flatten)]
    pub extra: VariantLatents,
}

/// Variant-specific latent payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariantLatents {
    Bcmb,
    Bcms {
        /// Leader confidence threshold ε⁺_L ≤ ε⁺_F.
        eps_plus_leader: f64,
        /// Leader backfire threshold ε⁻_L ≥ ε⁻_F.
        eps_minus_leader: f64,
        /// Per-agent role, `true` = leader.
        roles: Vec<bool>,
    },
    Bcmi {
        /// Attention depth K ∈ [1, F].
        k_attend: u32,
    },
    Bcmu {
        /// Backfire switch β.
        backfire: bool,
    },
    Bcmg {
        /// Rewiring threshold γ ∈ [0, 1].
        gamma: f64,
    },
}

impl VariantLatents {
    pub fn variant(&self) -> Variant {
        match self {
            VariantLatents::Bcmb => Variant::Bcmb,
            VariantLatents::Bcms { .. } => Variant::Bcms,
            VariantLatents::Bcmi { .. } => Variant::Bcmi,
            VariantLatents::Bcmu { .. } => Variant::Bcmu,
            VariantLatents::Bcmg { .. } => Variant::Bcmg,
        }
    }
}

impl LatentParams {
    pub fn bcmb(eps_plus: f64, eps_minus: f64) -> Self {
        Self {
            eps_plus,
            eps_minus,
            extra: VariantLatents::Bcmb,
        }
    }

    pub fn bcms(
        eps: (f64, f64, f64, f64), // (ε⁺_F, ε⁺_L, ε⁻_F, ε⁻_L)
        roles: Vec<bool>,
    ) -> Self {
        Self {
            eps_plus: eps.0,
            eps_minus: eps.2,
            extra: VariantLatents::Bcms {
                eps_plus_leader: eps.1,
                eps_minus_leader: eps.3,
                roles,
            },
        }
    }

    pub fn bcmi(eps_plus: f64, eps_minus: f64, k_attend: u32) -> Self {
        Self {
            eps_plus,
            eps_minus,
            extra: VariantLatents::Bcmi { k_attend },
        }
    }

    pub fn bcmu(eps_plus: f64, eps_minus: f64, backfire: bool) -> Self {
        Self {
            eps_plus,
            eps_minus,
            extra: VariantLatents::Bcmu { backfire },
        }
    }

    pub fn bcmg(eps_plus: f64, eps_minus: f64, gamma: f64) -> Self {
        Self {
            eps_plus,
            eps_minus,
            extra: VariantLatents::Bcmg { gamma },
        }
    }

    pub fn variant(&self) -> Variant {
        self.extra.variant()
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        if self.variant() != config.variant {
            return Err(CoreError::VariantMismatch(format!(
                "latents are {} but config is {}",
                self.variant(),
                config.variant
            )));
        }
        if !(0.0..=0.5).contains(&self.eps_plus) {
            return Err(CoreError::Config(format!(
                "eps_plus must be in [0, 0.5], got {}",
                self.eps_plus
            )));
        }
        if !(0.5..=1.0).contains(&self.eps_minus) {
            return Err(CoreError::Config(format!(
                "eps_minus must be in [0.5, 1], got {}",
                self.eps_minus
            )));
        }
        match &self.extra {
            VariantLatents::Bcms {
                eps_plus_leader,
                eps_minus_leader,
                roles,
            } => {
                if !(0.0..=0.5).contains(eps_plus_leader)
                    || !(0.5..=1.0).contains(eps_minus_leader)
                {
                    return Err(CoreError::Config("leader thresholds out of range".into()));
                }
                // Followers are more likely to change opinion.
                if self.eps_plus < *eps_plus_leader || self.eps_minus > *eps_minus_leader {
                    return Err(CoreError::Config(format!(
                        "role ordering violated: need ε⁺_F ≥ ε⁺_L and ε⁻_F ≤ ε⁻_L, got ({}, {}, {}, {})",
                        self.eps_plus, eps_plus_leader, self.eps_minus, eps_minus_leader
                    )));
                }
                if roles.len() != config.n_agents as usize {
                    return Err(CoreError::Config(format!(
                        "roles length {} != n_agents {}",
                        roles.len(),
                        config.n_agents
                    )));
                }
            }
            VariantLatents::Bcmi { k_attend } => {
                let f = config.feed_len.unwrap_or(0);
                if *k_attend < 1 || *k_attend > f {
                    return Err(CoreError::Config(format!(
                        "k_attend must be in [1, {f}], got {k_attend}"
                    )));
                }
            }
            VariantLatents::Bcmg { gamma } => {
                if !(0.0..=1.0).contains(gamma) {
                    return Err(CoreError::Config(format!(
                        "gamma must be in [0,1], got {gamma}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Which dynamics an interaction followed (BCM-G; always `Update`
/// elsewhere). Serialized as 0 = update, 1 = rewire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    Update,
    Rewire,
}

impl Serialize for Dynamics {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(match self {
            Dynamics::Update => 0,
            Dynamics::Rewire => 1,
        })
    }
}

impl<'de> Deserialize<'de> for Dynamics {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(Dynamics::Update),
            1 => Ok(Dynamics::Rewire),
            other => Err(serde::de::Error::custom(format!(
                "dynamics flag must be 0 or 1, got {other}"
            ))),
        }
    }
}

/// One observed interaction.
///
/// `participants` is `[u, v]` for pair variants (`v` is the updated
/// agent), `[u₁, …, u_F, v]` for BCM-I, and `[u, v]` or `[u, v, w, z]` for
/// BCM-G when a rewire actually replaced `(u,v),(w,z)` by `(u,z),(w,v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub step: u32,
    pub participants: Vec<u32>,
    pub d: Dynamics,
    pub s_plus: bool,
    pub s_minus: bool,
    pub s_rewire: bool,
}

impl InteractionEvent {
    /// Source and target for pair variants (and BCM-G).
    pub fn pair(&self) -> (u32, u32) {
        (self.participants[0], self.participants[1])
    }

    /// Feed and target for BCM-I.
    pub fn feed_and_target(&self) -> (&[u32], u32) {
        let (last, feed) = self.participants.split_last().expect("empty participants");
        (feed, *last)
    }

    /// Rewiring partner edge, when one was applied.
    pub fn rewire_pair(&self) -> Option<(u32, u32)> {
        (self.participants.len() == 4).then(|| (self.participants[2], self.participants[3]))
    }
}

/// A fully observed simulation run: the data `y` handed to inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: ModelConfig,
    pub x0: Vec<f64>,
    /// Initial edge list (BCM-G only).
    pub initial_edges: Option<Vec<(u32, u32)>>,
    pub events: Vec<InteractionEvent>,
}

/// Outcome of the opinion-update rule for one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub s_plus: bool,
    pub s_minus: bool,
}

/// Inputs of one opinion update.
pub enum EventInputs<'a> {
    /// Source `u`, target `v`.
    Pair { u: u32, v: u32 },
    /// Ordered feed and target `v` (BCM-I).
    Feed { feed: &'a [u32], target: u32 },
}

/// Apply the bounded-confidence update rule for one event, in place.
///
/// Total on valid inputs: resolves the target's thresholds and rates from
/// the variant, classifies via the hard thresholds, moves the target
/// opinion, then clamps to `[0, 1]`.
pub fn step_update(
    x: &mut [f64],
    inputs: &EventInputs<'_>,
    latents: &LatentParams,
    config: &ModelConfig,
) -> Outcome {
    let (delta, v) = match inputs {
        EventInputs::Pair { u, v } => (x[*u as usize] - x[*v as usize], *v),
        EventInputs::Feed { feed, target } => {
            let k = match &latents.extra {
                VariantLatents::Bcmi { k_attend } => *k_attend as usize,
                _ => unreachable!("feed inputs outside BCM-I"),
            };
            let mean = feed[..k].iter().map(|&a| x[a as usize]).sum::<f64>() / k as f64;
            (mean - x[*target as usize], *target)
        }
    };
    let (eps_plus, eps_minus, mu_plus, mu_minus) = match &latents.extra {
        VariantLatents::Bcms {
            eps_plus_leader,
            eps_minus_leader,
            roles,
        } if roles[v as usize] => (
            *eps_plus_leader,
            *eps_minus_leader,
            config.mu_plus_l(),
            config.mu_minus_l(),
        ),
        _ => (latents.eps_plus, latents.eps_minus, config.mu_plus, config.mu_minus),
    };
    let gap = delta.abs();
    let mut outcome = Outcome {
        s_plus: false,
        s_minus: false,
    };
    let xv = &mut x[v as usize];
    if gap <= eps_plus {
        outcome.s_plus = true;
        *xv += mu_plus * delta;
    } else if gap >= eps_minus {
        outcome.s_minus = true;
        let backfire = match &latents.extra {
            VariantLatents::Bcmu { backfire } => f64::from(*backfire),
            _ => 1.0,
        };
        *xv -= backfire * mu_minus * delta;
    }
    *xv = xv.clamp(0.0, 1.0);
    outcome
}

/// Initial opinions: i.i.d. uniform on `[0, 1]` from stream 0 of the seed.
pub fn draw_x0(config: &ModelConfig) -> Vec<f64> {
    let mut rng = stream_rng(config.seed, STREAM_X0);
    (0..config.n_agents).map(|_| rng.random::<f64>()).collect()
}

/// Run the model forward from seed-drawn initial conditions.
pub fn simulate(config: &ModelConfig, latents: &LatentParams) -> Result<Trajectory> {
    config.validate()?;
    latents.validate(config)?;
    let x0 = draw_x0(config);
    simulate_from(config, latents, x0, None)
}

/// Run the model forward from explicit initial opinions (and, for BCM-G,
/// an optional explicit initial graph). The interaction schedule is still
/// drawn from the config seed; ABC uses this to condition on the observed
/// initial state while re-simulating everything stochastic.
pub fn simulate_from(
    config: &ModelConfig,
    latents: &LatentParams,
    x0: Vec<f64>,
    initial_edges: Option<Vec<(u32, u32)>>,
) -> Result<Trajectory> {
    config.validate()?;
    latents.validate(config)?;
    if x0.len() != config.n_agents as usize {
        return Err(CoreError::Config(format!(
            "x0 length {} != n_agents {}",
            x0.len(),
            config.n_agents
        )));
    }
    if x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(CoreError::Config("x0 entries must lie in [0,1]".into()));
    }

    let mut graph = match config.variant {
        Variant::Bcmg => Some(match initial_edges {
            Some(edges) => Graph::from_edges(config.n_agents, &edges)?,
            None => init_graph(
                config.n_agents,
                config.graph_density.unwrap_or(0.1),
                &mut stream_rng(config.seed, STREAM_GRAPH),
            )?,
        }),
        _ => None,
    };
    if let Some(g) = &graph {
        if g.n_edges() < 2 {
            return Err(CoreError::InfeasibleRewire { edges: g.n_edges() });
        }
    }
    let initial_edges = graph.as_ref().map(|g| {
        let mut e = g.edges().to_vec();
        e.sort_unstable();
        e
    });

    let mut x = x0.clone();
    let n = config.n_agents;
    let mut events = Vec::with_capacity(config.n_events());
    let mut feed_sampler = match config.variant {
        Variant::Bcmi => Some(DistinctSampler::new(n as usize)),
        _ => None,
    };
    let mut feed_buf: Vec<u32> = Vec::new();

    for t in 0..config.n_steps {
        let mut rng = stream_rng(config.seed, STREAM_STEP_BASE + u64::from(t));
        for _ in 0..config.interactions_per_step {
            let event = match config.variant {
                Variant::Bcmb | Variant::Bcms | Variant::Bcmu => {
                    let (u, v) = sample_pair(&mut rng, n);
                    let out = step_update(&mut x, &EventInputs::Pair { u, v }, latents, config);
                    InteractionEvent {
                        step: t,
                        participants: vec![u, v],
                        d: Dynamics::Update,
                        s_plus: out.s_plus,
                        s_minus: out.s_minus,
                        s_rewire: false,
                    }
                }
                Variant::Bcmi => {
                    let f = config.feed_len.unwrap() as usize;
                    feed_sampler
                        .as_mut()
                        .unwrap()
                        .sample(&mut rng, f + 1, &mut feed_buf);
                    let target = feed_buf[f];
                    let out = step_update(
                        &mut x,
                        &EventInputs::Feed {
                            feed: &feed_buf[..f],
                            target,
                        },
                        latents,
                        config,
                    );
                    InteractionEvent {
                        step: t,
                        participants: feed_buf.clone(),
                        d: Dynamics::Update,
                        s_plus: out.s_plus,
                        s_minus: out.s_minus,
                        s_rewire: false,
                    }
                }
                Variant::Bcmg => {
                    let g = graph.as_mut().unwrap();
                    let (u, v) = g.sample_oriented_edge(&mut rng);
                    let update_dynamics = rng.random::<f64>() < config.xi.unwrap();
                    if update_dynamics {
                        let out =
                            step_update(&mut x, &EventInputs::Pair { u, v }, latents, config);
                        InteractionEvent {
                            step: t,
                            participants: vec![u, v],
                            d: Dynamics::Update,
                            s_plus: out.s_plus,
                            s_minus: out.s_minus,
                            s_rewire: false,
                        }
                    } else {
                        let gamma = match &latents.extra {
                            VariantLatents::Bcmg { gamma } => *gamma,
                            _ => unreachable!(),
                        };
                        let gap = (x[u as usize] - x[v as usize]).abs();
                        let s_rewire = gap > gamma;
                        let mut participants = vec![u, v];
                        if s_rewire {
                            if let Some((w, z)) = sample_rewire(g, (u, v), &mut rng) {
                                participants.extend_from_slice(&[w, z]);
                            }
                        }
                        InteractionEvent {
                            step: t,
                            participants,
                            d: Dynamics::Rewire,
                            s_plus: false,
                            s_minus: false,
                            s_rewire,
                        }
                    }
                }
            };
            events.push(event);
        }
    }

    Ok(Trajectory {
        config: config.clone(),
        x0,
        initial_edges,
        events,
    })
}

/// Ordered distinct pair: `u` uniform, `v` uniform over the rest.
fn sample_pair(rng: &mut rand_chacha::ChaCha20Rng, n: u32) -> (u32, u32) {
    let u = rng.random_range(0..n);
    let mut v = rng.random_range(0..n - 1);
    if v >= u {
        v += 1;
    }
    (u, v)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Small valid instance per variant for smoke/property tests.
    pub(crate) fn small_instance(variant: Variant, seed: u64) -> (ModelConfig, LatentParams) {
        match variant {
            Variant::Bcmb => (
                ModelConfig::new(variant, 8, 6, seed),
                LatentParams::bcmb(0.3, 0.7),
            ),
            Variant::Bcms => (
                ModelConfig::new(variant, 6, 6, seed),
                LatentParams::bcms(
                    (0.35, 0.15, 0.65, 0.85),
                    vec![true, false, false, true, false, false],
                ),
            ),
            Variant::Bcmi => (
                ModelConfig::new(variant, 9, 6, seed).with_feed_len(4),
                LatentParams::bcmi(0.3, 0.7, 2),
            ),
            Variant::Bcmu => (
                ModelConfig::new(variant, 8, 6, seed),
                LatentParams::bcmu(0.3, 0.7, false),
            ),
            Variant::Bcmg => {
                let mut config = ModelConfig::new(variant, 8, 6, seed).with_xi(0.5);
                config.graph_density = Some(0.5);
                (config, LatentParams::bcmg(0.3, 0.7, 0.4))
            }
        }
    }
}

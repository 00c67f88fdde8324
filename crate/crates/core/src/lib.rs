//! Bounded-confidence opinion dynamics: simulation and parameter inference.
//!
//! The crate has three layers:
//!
//! * [`abm`] — forward simulators for the bounded-confidence model with
//!   backfire (BCM-b) and four extensions: leader/follower roles (BCM-S),
//!   higher-order feed interactions (BCM-I), a global backfire switch
//!   (BCM-U), and link rewiring on an Erdős–Rényi graph (BCM-G). All
//!   simulators are deterministic given a seed and produce fully observed
//!   interaction trajectories.
//! * [`pgabm`] — the same models re-expressed as differentiable generative
//!   models: sigmoid-relaxed outcome probabilities, Gumbel-Softmax
//!   relaxations for discrete latents, and per-variant log-joint densities
//!   over a trajectory, all generic over the scalar type so they can run on
//!   the [`autodiff`] tape.
//! * Inference: [`svi`] (mean-field normal stochastic variational
//!   inference), [`mcmc`] (Hamiltonian Monte Carlo), and [`abc`]
//!   (rejection ABC on per-step outcome counts), scored by [`metrics`].
//!
//! Independent simulations and fits can run data-parallel through [`exec`];
//! build with `--no-default-features` for strictly sequential execution.

pub mod abc;
pub mod abm;
pub mod autodiff;
pub mod error;
pub mod exec;
pub mod mcmc;
pub mod metrics;
pub mod pgabm;
pub mod rng;
pub mod svi;

pub use error::CoreError;

/// Crate-wide result alias.
pub type Result<T, E = CoreError> = std::result::Result<T, E>;

//! Grid experiment definitions: a versioned TOML file.
//!
//! ```toml
//! spec_version = 1
//! variant = "bcmb"
//! methods = ["svi", "abc"]
//! replicates = 2
//! master_seed = 42
//! time_limit_seconds = 10800.0
//! out_dir = "results"
//!
//! [axes]
//! t = [512, 2048]          # simulation lengths
//! n = [100]                # agent counts
//! mu = [0.02]              # update rates (μ⁺ = μ⁻)
//! eps = "sample"           # or [[0.25, 0.75]] ([ε⁺_F, ε⁺_L, ε⁻_F, ε⁻_L] for bcms)
//! leader_frac = [0.2]      # bcms
//! f = [10]                 # bcmi feed length
//! k = "sample"             # bcmi ground-truth attention depth, or [4]
//! beta = "sample"          # bcmu, or [true]
//! xi = [0.5]               # bcmg
//! gamma = "sample"         # bcmg, or [0.4]
//!
//! [svi]
//! n_epochs = 20000
//! ```
//!
//! `"sample"` axes do not enter the grid product; their ground-truth
//! values are drawn per cell from the cell seed — ε from the evaluation
//! grids {0.05, 0.15, …, 0.45} × {0.55, …, 0.95}, discrete latents
//! uniformly over their supports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bcm_core::abm::Variant;
use bcm_core::svi::Method;
use bcm_core::CoreError;

pub const SPEC_VERSION: u32 = 1;

/// An axis that is either swept over explicit values or sampled per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis<T> {
    Tag(String),
    Values(Vec<T>),
}

impl<T> Default for Axis<T> {
    fn default() -> Self {
        Axis::Tag("sample".to_string())
    }
}

impl<T> Axis<T> {
    pub fn is_sample(&self) -> bool {
        matches!(self, Axis::Tag(_))
    }

    pub fn values(&self) -> &[T] {
        match self {
            Axis::Tag(_) => &[],
            Axis::Values(v) => v,
        }
    }

    /// Number of grid positions this axis contributes (1 when sampled).
    pub fn arity(&self) -> usize {
        match self {
            Axis::Tag(_) => 1,
            Axis::Values(v) => v.len(),
        }
    }

    fn validate(&self, name: &str) -> Result<(), CoreError> {
        match self {
            Axis::Tag(s) if s == "sample" => Ok(()),
            Axis::Tag(s) => Err(CoreError::Config(format!(
                "axis '{name}': unknown tag '{s}' (only \"sample\" is recognized)"
            ))),
            Axis::Values(v) if v.is_empty() => {
                Err(CoreError::Config(format!("axis '{name}' must be non-empty")))
            }
            Axis::Values(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default = "default_t")]
    pub t: Vec<u32>,
    #[serde(default = "default_n")]
    pub n: Vec<u32>,
    #[serde(default = "default_mu")]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub eps: Axis<Vec<f64>>,
    #[serde(default = "default_leader_frac")]
    pub leader_frac: Vec<f64>,
    #[serde(default = "default_f")]
    pub f: Vec<u32>,
    #[serde(default)]
    pub k: Axis<u32>,
    #[serde(default)]
    pub beta: Axis<bool>,
    #[serde(default = "default_xi")]
    pub xi: Vec<f64>,
    #[serde(default)]
    pub gamma: Axis<f64>,
}

fn default_t() -> Vec<u32> {
    vec![512]
}
fn default_n() -> Vec<u32> {
    vec![100]
}
fn default_mu() -> Vec<f64> {
    vec![0.02]
}
fn default_leader_frac() -> Vec<f64> {
    vec![0.2]
}
fn default_f() -> Vec<u32> {
    vec![5]
}
fn default_xi() -> Vec<f64> {
    vec![0.5]
}

impl Default for Axes {
    fn default() -> Self {
        Self {
            t: default_t(),
            n: default_n(),
            mu: default_mu(),
            eps: Axis::default(),
            leader_frac: default_leader_frac(),
            f: default_f(),
            k: Axis::default(),
            beta: Axis::default(),
            xi: default_xi(),
            gamma: Axis::default(),
        }
    }
}

/// Optional per-method hyperparameter overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SviOverrides {
    pub n_epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub elbo_samples_per_step: Option<usize>,
    pub minibatch_events: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmcOverrides {
    pub step_size: Option<f64>,
    pub n_leapfrog: Option<usize>,
    pub n_burnin: Option<usize>,
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcOverrides {
    pub n_sims: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub spec_version: u32,
    pub variant: Variant,
    pub methods: Vec<Method>,
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    pub master_seed: u64,
    /// Per-method wall-clock budget; a method over budget records a
    /// timeout row instead of failing the cell.
    #[serde(default = "default_time_limit")]
    pub time_limit_seconds: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_ips")]
    pub interactions_per_step: u32,
    #[serde(default = "default_density")]
    pub graph_density: f64,
    #[serde(default)]
    pub axes: Axes,
    #[serde(default)]
    pub svi: SviOverrides,
    #[serde(default)]
    pub hmc: HmcOverrides,
    #[serde(default)]
    pub abc: AbcOverrides,
}

fn default_replicates() -> u32 {
    1
}
fn default_time_limit() -> f64 {
    10_800.0
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_ips() -> u32 {
    10
}
fn default_density() -> f64 {
    0.1
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, CoreError> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| CoreError::Config(format!("spec parse: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.spec_version != SPEC_VERSION {
            return Err(CoreError::Config(format!(
                "unsupported spec_version {} (expected {SPEC_VERSION})",
                self.spec_version
            )));
        }
        if self.methods.is_empty() {
            return Err(CoreError::Config("methods must be non-empty".into()));
        }
        if self.replicates == 0 {
            return Err(CoreError::Config("replicates must be positive".into()));
        }
        if self.time_limit_seconds < 0.0 {
            return Err(CoreError::Config("time_limit_seconds must be >= 0".into()));
        }
        for (name, axis) in [("t", &self.axes.t), ("n", &self.axes.n)] {
            if axis.is_empty() {
                return Err(CoreError::Config(format!("axis '{name}' must be non-empty")));
            }
        }
        if self.axes.mu.is_empty() {
            return Err(CoreError::Config("axis 'mu' must be non-empty".into()));
        }
        self.axes.eps.validate("eps")?;
        self.axes.k.validate("k")?;
        self.axes.beta.validate("beta")?;
        self.axes.gamma.validate("gamma")?;
        if let Axis::Values(rows) = &self.axes.eps {
            let want = if self.variant == Variant::Bcms { 4 } else { 2 };
            for row in rows {
                if row.len() != want {
                    return Err(CoreError::Config(format!(
                        "eps rows for {} must have {want} entries, got {}",
                        self.variant,
                        row.len()
                    )));
                }
            }
        }
        match self.variant {
            Variant::Bcms if self.axes.leader_frac.is_empty() => {
                Err(CoreError::Config("axis 'leader_frac' must be non-empty".into()))
            }
            Variant::Bcmi if self.axes.f.is_empty() => {
                Err(CoreError::Config("axis 'f' must be non-empty".into()))
            }
            Variant::Bcmg if self.axes.xi.is_empty() => {
                Err(CoreError::Config("axis 'xi' must be non-empty".into()))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
spec_version = 1
variant = "bcmb"
methods = ["svi"]
master_seed = 7
"#;

    #[test]
    fn minimal_spec_parses_with_defaults() {
        let spec = ExperimentSpec::from_toml(MINIMAL).unwrap();
        assert_eq!(spec.replicates, 1);
        assert_eq!(spec.axes.t, vec![512]);
        assert!(spec.axes.eps.is_sample());
        assert_eq!(spec.time_limit_seconds, 10_800.0);
    }

    #[test]
    fn full_spec_round_trips() {
        let text = r#"
spec_version = 1
variant = "bcms"
methods = ["svi", "hmc", "abc"]
replicates = 2
master_seed = 11
time_limit_seconds = 60.0
out_dir = "out"

[axes]
t = [128, 512]
n = [50]
mu = [0.02]
eps = [[0.35, 0.15, 0.65, 0.85]]
leader_frac = [0.2]

[svi]
n_epochs = 500
minibatch_events = 256
"#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.methods.len(), 3);
        assert_eq!(spec.axes.eps.values().len(), 1);
        assert_eq!(spec.svi.n_epochs, Some(500));
    }

    #[test]
    fn bad_specs_are_rejected() {
        // wrong version
        assert!(ExperimentSpec::from_toml(&MINIMAL.replace("= 1", "= 9")).is_err());
        // no methods
        assert!(ExperimentSpec::from_toml(&MINIMAL.replace("[\"svi\"]", "[]")).is_err());
        // malformed eps row for bcmb
        let text = format!("{MINIMAL}\n[axes]\neps = [[0.1, 0.2, 0.3]]\n");
        assert!(ExperimentSpec::from_toml(&text).is_err());
        // unknown axis tag
        let text = format!("{MINIMAL}\n[axes]\neps = \"random\"\n");
        assert!(ExperimentSpec::from_toml(&text).is_err());
        // unknown field
        let text = format!("{MINIMAL}\nbogus = 3\n");
        assert!(ExperimentSpec::from_toml(&text).is_err());
    }
}

//! JSON experiment configuration.
//!
//! Every field has a default, so `{}` is a valid configuration describing the
//! full sweep on the nonlinear-diffusion model:
//!
//! ```json
//! {
//!   "model": "nonlinear",
//!   "data_seed": 7,
//!   "data_level": 8,
//!   "t": 50,
//!   "phi": "identity",
//!   "policy": "ess:0.25",
//!   "runs": 100,
//!   "seed": 1,
//!   "levels": [1, 2, 3, 4, 5, 6, 7],
//!   "ground_truth": { "level": 8, "particles": 10000, "seed": 8, "cross_check_runs": 10 },
//!   "methods": [
//!     { "method": "pf", "particle_scale": 1.0 },
//!     { "method": "mlpf", "allocation_scale": 1.0 },
//!     { "method": "st", "alpha": 0.25, "max_level": 7, "pilot_replicates": 100, "replicate_scale": 1.0 },
//!     { "method": "cs", "alpha": 0.25, "max_level": 7, "pilot_replicates": 100, "replicate_scale": 1.0 }
//!   ],
//!   "output_dir": "."
//! }
//! ```
//!
//! Sweep point `L` targets `ε = 2^{-L/2}`. PF runs at level `L` with
//! `⌈particle_scale · ε⁻²⌉` particles; MLPF uses the standard allocation
//! scaled by `allocation_scale`; ST and CS average
//! `M = ⌈replicate_scale · c · ε⁻²⌉` draws, where `c` is the single-draw
//! variance measured on `pilot_replicates` pilot draws. `particles` for ST
//! and CS defaults to 100 when `σ` is constant and 200 otherwise.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zakai_core::estimators::{default_particles, DEFAULT_ALPHA, DEFAULT_MAX_LEVEL};
use zakai_core::{builtin_model, BuiltinModel, ResamplingPolicy, SdeModel, TestFunction};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundTruthConfig {
    pub level: u32,
    pub particles: usize,
    pub seed: u64,
    pub policy: String,
    /// Independent repeats used to estimate the PF's standard deviation for
    /// the oracle cross-check (OU only; 0 disables the check).
    pub cross_check_runs: usize,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        GroundTruthConfig {
            level: 8,
            particles: 10_000,
            seed: 8,
            policy: "ess:0.25".into(),
            cross_check_runs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum MethodConfig {
    Pf {
        #[serde(default = "one")]
        particle_scale: f64,
    },
    Mlpf {
        #[serde(default = "one")]
        allocation_scale: f64,
    },
    St(RandomizedConfig),
    Cs(RandomizedConfig),
}

fn one() -> f64 {
    1.0
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Pf { .. } => "pf",
            MethodConfig::Mlpf { .. } => "mlpf",
            MethodConfig::St(_) => "st",
            MethodConfig::Cs(_) => "cs",
        }
    }

    /// Tag mixed into the seed of every run of this method.
    pub fn seed_tag(&self) -> u64 {
        match self {
            MethodConfig::Pf { .. } => 1,
            MethodConfig::Mlpf { .. } => 2,
            MethodConfig::St(_) => 3,
            MethodConfig::Cs(_) => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizedConfig {
    pub particles: Option<usize>,
    pub alpha: f64,
    pub max_level: u32,
    pub pilot_replicates: usize,
    pub replicate_scale: f64,
}

impl Default for RandomizedConfig {
    fn default() -> Self {
        RandomizedConfig {
            particles: None,
            alpha: DEFAULT_ALPHA,
            max_level: DEFAULT_MAX_LEVEL,
            pilot_replicates: 100,
            replicate_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    pub data_seed: u64,
    pub data_level: u32,
    /// Reads the observation path from this file instead of simulating it.
    pub data_file: Option<PathBuf>,
    pub t: usize,
    pub phi: String,
    pub policy: String,
    pub runs: usize,
    pub seed: u64,
    pub levels: Vec<u32>,
    pub ground_truth: GroundTruthConfig,
    pub methods: Vec<MethodConfig>,
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "nonlinear".into(),
            data_seed: 7,
            data_level: 8,
            data_file: None,
            t: 50,
            phi: "identity".into(),
            policy: "ess:0.25".into(),
            runs: 100,
            seed: 1,
            levels: (1..=7).collect(),
            ground_truth: GroundTruthConfig::default(),
            methods: vec![
                MethodConfig::Pf { particle_scale: 1.0 },
                MethodConfig::Mlpf { allocation_scale: 1.0 },
                MethodConfig::St(RandomizedConfig::default()),
                MethodConfig::Cs(RandomizedConfig::default()),
            ],
            output_dir: PathBuf::from("."),
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(file: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(file).map_err(|source| Error::File {
            path: file.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn builtin(&self) -> Result<BuiltinModel> {
        Ok(builtin_model(&self.model)?)
    }

    pub fn test_function(&self) -> Result<TestFunction> {
        Ok(self.phi.parse()?)
    }

    pub fn resampling(&self) -> Result<ResamplingPolicy> {
        Ok(self.policy.parse()?)
    }

    pub fn ground_truth_policy(&self) -> Result<ResamplingPolicy> {
        Ok(self.ground_truth.policy.parse()?)
    }

    /// Checks everything that can be checked before touching the data.
    pub fn validate(&self) -> Result<()> {
        let model = self.builtin()?;
        self.test_function()?;
        self.resampling()?;
        self.ground_truth_policy()?;
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.t == 0 {
            return bad("t must be at least 1");
        }
        if self.runs < 2 {
            return bad("runs must be at least 2 to estimate a mean square error");
        }
        if self.levels.is_empty() {
            return bad("levels must not be empty");
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty");
        }
        if self.ground_truth.particles == 0 {
            return bad("ground truth needs at least one particle");
        }
        let finest = *self.levels.iter().max().unwrap();
        let mut needed = finest.max(self.ground_truth.level);
        for m in &self.methods {
            match m {
                MethodConfig::Pf { particle_scale: s } | MethodConfig::Mlpf { allocation_scale: s } => {
                    if !(*s > 0.0 && s.is_finite()) {
                        return bad("scales must be positive");
                    }
                }
                MethodConfig::St(r) | MethodConfig::Cs(r) => {
                    if !(r.alpha > 0.0 && r.alpha < 0.5) && !model.sigma_constant() {
                        return bad("alpha must lie in (0, 1/2)");
                    }
                    if r.pilot_replicates < 2 {
                        return bad("pilot_replicates must be at least 2");
                    }
                    if !(r.replicate_scale > 0.0 && r.replicate_scale.is_finite()) {
                        return bad("replicate_scale must be positive");
                    }
                    if r.particles == Some(0) {
                        return bad("particles must be positive");
                    }
                    needed = needed.max(r.max_level);
                }
            }
        }
        if self.data_file.is_none() && needed > self.data_level {
            return Err(Error::Core(zakai_core::Error::Resolution {
                requested: needed,
                finest: self.data_level,
            }));
        }
        Ok(())
    }

    pub fn randomized_particles(&self, r: &RandomizedConfig) -> Result<usize> {
        Ok(r.particles
            .unwrap_or(default_particles(self.builtin()?.sigma_constant())))
    }
}

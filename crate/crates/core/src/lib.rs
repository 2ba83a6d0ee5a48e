//! Unbiased estimation of the unnormalized filter (the solution of Zakai's
//! equation) for diffusions observed through `dY = h(X) dt + dB`.
//!
//! The crate is `no_std` and only needs an allocator. It provides
//!
//! - [`models`]: the diffusion/observation model interface and four builtin
//!   one-dimensional models,
//! - [`observations`]: observation paths stored at the finest resolution and
//!   the Girsanov-type weights of the Euler discretized model,
//! - [`euler`]: the Euler kernel on unit time blocks and its synchronous
//!   coupling across two adjacent levels,
//! - [`resampling`]: log-weight normalization, ESS, multinomial selection and
//!   the maximal coupling of two probability mass functions,
//! - [`filters`]: the particle filter and the coupled particle filter,
//! - [`estimators`]: the multilevel particle filter, level distributions and
//!   the single-term / coupled-sum randomized estimators,
//! - [`oracle`]: an exact Kalman evaluation of the discretized normalizing
//!   constant for linear-Gaussian models.
//!
//! Everything random is driven by [`rng::SimRng`] seeded from `u64` seeds, so
//! every estimate is reproducible bit-for-bit from its seed.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod estimators;
pub mod euler;
pub mod filters;
pub mod models;
pub mod observations;
pub mod oracle;
pub mod resampling;
pub mod rng;

pub use error::{Error, Result};
pub use estimators::{
    allocate_levels, cs_estimate, mlpf_run, replicate_average, st_estimate, LevelAllocation, LevelDistribution,
    LevelDistributionKind, RandomizedEstimator, RandomizedKind, ReplicateSummary, UnbiasedEstimate,
};
pub use euler::{coupled_euler_block, euler_block, PathBlock};
pub use filters::{cpf_run, pf_run, ResamplingPolicy, TestFunction};
pub use models::{builtin_model, BuiltinModel, CustomModel, SdeModel};
pub use observations::ObservationPath;
pub use oracle::{kalman_log_gamma, LinearGaussianSpec, OracleValue};

//! Exact discretized normalizing constants for scalar linear-Gaussian models.
//!
//! With `h(x) = x` the weight `G_k(x)` is the ratio of Gaussian densities
//! `ψ(Δy_k; x Δ_l, Δ_l) / ψ(Δy_k; 0, Δ_l)`, so `γ_t^l(1)` is the marginal
//! likelihood of the increments under the Euler chain divided by the
//! Brownian reference likelihood. A Kalman filter computes both exactly.

use core::f64::consts::PI;

use crate::models::{BuiltinModel, OU_SIGMA};
use crate::observations::{step_size, steps_per_unit, ObservationPath};
use crate::{Error, Result};

/// `x_{k+1} = A x_k + N(0, Q)`, `Δy_k = H x_k + N(0, R)`, `x_0 ~ N(x0, p0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussianSpec {
    pub transition: f64,
    pub state_noise: f64,
    pub obs_gain: f64,
    pub obs_noise: f64,
    pub x0: f64,
    pub p0: f64,
    pub level: u32,
}

impl LinearGaussianSpec {
    pub fn new(transition: f64, state_noise: f64, obs_gain: f64, obs_noise: f64, x0: f64, level: u32) -> Result<Self> {
        if !(state_noise > 0.0 && obs_noise > 0.0) {
            return Err(Error::Config("noise variances must be positive"));
        }
        Ok(LinearGaussianSpec {
            transition,
            state_noise,
            obs_gain,
            obs_noise,
            x0,
            p0: 0.0,
            level,
        })
    }

    /// The Euler-discretized OU model at `level`.
    pub fn for_ou(level: u32) -> Self {
        let delta = step_size(level);
        LinearGaussianSpec {
            transition: 1.0 - delta,
            state_noise: OU_SIGMA * OU_SIGMA * delta,
            obs_gain: delta,
            obs_noise: delta,
            x0: 0.0,
            p0: 0.0,
            level,
        }
    }

    /// Only the OU model is linear-Gaussian.
    pub fn for_model(model: BuiltinModel, level: u32) -> Result<Self> {
        match model {
            BuiltinModel::OrnsteinUhlenbeck => Ok(Self::for_ou(level)),
            _ => Err(Error::UnsupportedModel),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    /// `log γ_t^l(1)`.
    pub log_gamma_one: f64,
    /// Predicted mean of `x` at time `t`, i.e. `η_t^l(id)`.
    pub posterior_mean: f64,
    /// Predicted variance of `x` at time `t`.
    pub posterior_variance: f64,
}

impl OracleValue {
    pub fn gamma_one(&self) -> f64 {
        libm::exp(self.log_gamma_one)
    }

    /// `γ_t^l(id) = γ_t^l(1) · η_t^l(id)`.
    pub fn gamma_identity(&self) -> f64 {
        self.gamma_one() * self.posterior_mean
    }
}

fn log_normal_density(y: f64, mean: f64, var: f64) -> f64 {
    let r = y - mean;
    -0.5 * (libm::log(2.0 * PI * var) + r * r / var)
}

/// `log γ_t^l(1)` and `η_t^l(id)` on the observation path.
pub fn kalman_log_gamma(spec: &LinearGaussianSpec, path: &ObservationPath, t: usize) -> Result<OracleValue> {
    if spec.level > path.finest_level() {
        return Err(Error::Resolution {
            requested: spec.level,
            finest: path.finest_level(),
        });
    }
    if path.obs_dim() != 1 {
        return Err(Error::Shape {
            expected: 1,
            found: path.obs_dim(),
        });
    }
    if t == 0 || t > path.horizon() {
        return Err(Error::Horizon {
            requested: t,
            horizon: path.horizon(),
        });
    }
    let incs = path.at_level(spec.level)?;
    let (a, q, h, r) = (spec.transition, spec.state_noise, spec.obs_gain, spec.obs_noise);
    let mut m = spec.x0;
    let mut p = spec.p0;
    let mut log_gamma = 0.0;
    for k in 0..t * steps_per_unit(spec.level) {
        let dy = incs.get(k)[0];
        let s = h * h * p + r;
        log_gamma += log_normal_density(dy, h * m, s) - log_normal_density(dy, 0.0, r);
        let gain = p * h / s;
        m += gain * (dy - h * m);
        p *= 1.0 - gain * h;
        m *= a;
        p = a * a * p + q;
    }
    Ok(OracleValue {
        log_gamma_one: log_gamma,
        posterior_mean: m,
        posterior_variance: p,
    })
}

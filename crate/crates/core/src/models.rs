//! Diffusion and observation models.
//!
//! A model describes the signal `dX = b(X) dt + σ(X) dW`, started at `x_*`,
//! and the observation drift `h` in `dY = h(X) dt + dB`. Boundedness and
//! Lipschitz conditions on `b`, `σ`, `h` are not checked; several of the
//! builtin models (GBM in particular) do not satisfy them.

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

/// A partially observed diffusion.
///
/// Vectors are passed as slices of length [`state_dim`](Self::state_dim) or
/// [`obs_dim`](Self::obs_dim); the diffusion matrix is written row-major into
/// a slice of length `state_dim²`.
pub trait SdeModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
    fn observation(&self, x: &[f64], out: &mut [f64]);
    fn initial_state(&self) -> &[f64];

    /// Whether `σ` is constant in `x`. Selects the level distribution and
    /// the multilevel allocation rule.
    fn sigma_constant(&self) -> bool;
}

/// Diffusion covariance `a(x) = σ(x) σ(x)*`, row-major.
pub fn diffusion_covariance<M: SdeModel + ?Sized>(model: &M, x: &[f64]) -> Vec<f64> {
    let d = model.state_dim();
    let mut s = vec![0.0; d * d];
    model.diffusion(x, &mut s);
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = (0..d).map(|k| s[i * d + k] * s[j * d + k]).sum();
        }
    }
    a
}

pub const LANGEVIN_DOF: f64 = 10.0;
pub const GBM_DRIFT: f64 = 0.05;
pub const GBM_VOLATILITY: f64 = 0.2;
pub const OU_SIGMA: f64 = 0.5;
pub const LANGEVIN_SIGMA: f64 = 0.5;

/// The four scalar benchmark models, all observed through `h(x) = x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinModel {
    /// `b(x) = -x`, `σ = 0.5`, `x_* = 0`.
    OrnsteinUhlenbeck,
    /// `b = ½ (log f)'` for a Student-t density with 10 degrees of freedom,
    /// `σ = 0.5`, `x_* = 0`.
    Langevin,
    /// `b(x) = 0.05 x`, `σ(x) = 0.2 x`, `x_* = 1`.
    GeometricBrownian,
    /// `b(x) = -x`, `σ(x) = 1/√(1+x²)`, `x_* = 0`.
    NonlinearDiffusion,
}

impl BuiltinModel {
    pub const ALL: [BuiltinModel; 4] = [
        BuiltinModel::OrnsteinUhlenbeck,
        BuiltinModel::Langevin,
        BuiltinModel::GeometricBrownian,
        BuiltinModel::NonlinearDiffusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinModel::OrnsteinUhlenbeck => "ou",
            BuiltinModel::Langevin => "langevin",
            BuiltinModel::GeometricBrownian => "gbm",
            BuiltinModel::NonlinearDiffusion => "nonlinear",
        }
    }

    fn drift_scalar(self, x: f64) -> f64 {
        match self {
            BuiltinModel::OrnsteinUhlenbeck | BuiltinModel::NonlinearDiffusion => -x,
            BuiltinModel::Langevin => {
                let nu = LANGEVIN_DOF;
                -0.5 * (nu + 1.0) * x / (nu + x * x)
            }
            BuiltinModel::GeometricBrownian => GBM_DRIFT * x,
        }
    }

    fn diffusion_scalar(self, x: f64) -> f64 {
        match self {
            BuiltinModel::OrnsteinUhlenbeck => OU_SIGMA,
            BuiltinModel::Langevin => LANGEVIN_SIGMA,
            BuiltinModel::GeometricBrownian => GBM_VOLATILITY * x,
            BuiltinModel::NonlinearDiffusion => 1.0 / libm::sqrt(1.0 + x * x),
        }
    }
}

static ZERO: [f64; 1] = [0.0];
static ONE: [f64; 1] = [1.0];

impl SdeModel for BuiltinModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    #[inline]
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.drift_scalar(x[0]);
    }

    #[inline]
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.diffusion_scalar(x[0]);
    }

    #[inline]
    fn observation(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }

    fn initial_state(&self) -> &[f64] {
        match self {
            BuiltinModel::GeometricBrownian => &ONE,
            _ => &ZERO,
        }
    }

    fn sigma_constant(&self) -> bool {
        matches!(self, BuiltinModel::OrnsteinUhlenbeck | BuiltinModel::Langevin)
    }
}

impl fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ou" | "ornstein-uhlenbeck" => Ok(BuiltinModel::OrnsteinUhlenbeck),
            "langevin" => Ok(BuiltinModel::Langevin),
            "gbm" | "geometric-brownian" => Ok(BuiltinModel::GeometricBrownian),
            "nonlinear" | "nonlinear-diffusion" => Ok(BuiltinModel::NonlinearDiffusion),
            _ => Err(Error::UnknownModel(s.to_string())),
        }
    }
}

/// Looks up a builtin model by name (`ou`, `langevin`, `gbm`, `nonlinear`).
pub fn builtin_model(name: &str) -> Result<BuiltinModel> {
    name.parse()
}

type VecFn = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A model assembled from closures, for models that are not builtin.
pub struct CustomModel {
    state_dim: usize,
    obs_dim: usize,
    drift: VecFn,
    diffusion: VecFn,
    observation: VecFn,
    initial_state: Vec<f64>,
    sigma_constant: bool,
}

impl CustomModel {
    pub fn new(
        state_dim: usize,
        obs_dim: usize,
        initial_state: Vec<f64>,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        observation: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if state_dim == 0 || obs_dim == 0 {
            return Err(Error::Config("model dimensions must be positive"));
        }
        if initial_state.len() != state_dim {
            return Err(Error::Shape {
                expected: state_dim,
                found: initial_state.len(),
            });
        }
        Ok(CustomModel {
            state_dim,
            obs_dim,
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
            observation: Box::new(observation),
            initial_state,
            sigma_constant: false,
        })
    }

    pub fn with_sigma_constant(mut self, constant: bool) -> Self {
        self.sigma_constant = constant;
        self
    }
}

impl fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomModel")
            .field("state_dim", &self.state_dim)
            .field("obs_dim", &self.obs_dim)
            .field("initial_state", &self.initial_state)
            .field("sigma_constant", &self.sigma_constant)
            .finish_non_exhaustive()
    }
}

impl SdeModel for CustomModel {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }

    fn observation(&self, x: &[f64], out: &mut [f64]) {
        (self.observation)(x, out)
    }

    fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    fn sigma_constant(&self) -> bool {
        self.sigma_constant
    }
}

impl<M: SdeModel + ?Sized> SdeModel for &M {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (**self).drift(x, out)
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (**self).diffusion(x, out)
    }
    fn observation(&self, x: &[f64], out: &mut [f64]) {
        (**self).observation(x, out)
    }
    fn initial_state(&self) -> &[f64] {
        (**self).initial_state()
    }
    fn sigma_constant(&self) -> bool {
        (**self).sigma_constant()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(m: BuiltinModel, x: f64) -> (f64, f64, f64) {
        let (mut b, mut s, mut h) = ([0.0], [0.0], [0.0]);
        m.drift(&[x], &mut b);
        m.diffusion(&[x], &mut s);
        m.observation(&[x], &mut h);
        (b[0], s[0], h[0])
    }

    #[test]
    fn ou_closed_form() {
        let m = builtin_model("OU").unwrap();
        assert_eq!(eval(m, 2.0).0, -2.0);
        assert_eq!(eval(m, 123.0).1, 0.5);
        assert_eq!(m.initial_state(), &[0.0]);
    }

    #[test]
    fn gbm_closed_form() {
        let m = BuiltinModel::GeometricBrownian;
        let (b, s, _) = eval(m, 1.0);
        assert_eq!(b, 0.05);
        assert_eq!(s, 0.2);
        assert_eq!(m.initial_state(), &[1.0]);
    }

    #[test]
    fn langevin_drift_values() {
        let m = BuiltinModel::Langevin;
        assert_eq!(eval(m, 0.0).0, 0.0);
        assert_eq!(eval(m, 1.0).0, -0.5);
    }

    #[test]
    fn langevin_drift_matches_log_density_gradient() {
        let nu = LANGEVIN_DOF;
        // log f up to its normalizing constant
        let log_f = |x: f64| -0.5 * (nu + 1.0) * libm::log(1.0 + x * x / nu);
        let h = 1e-5;
        for i in -5..=5 {
            let x = i as f64;
            let fd = 0.5 * (log_f(x + h) - log_f(x - h)) / (2.0 * h);
            let b = eval(BuiltinModel::Langevin, x).0;
            assert!((b - fd).abs() < 1e-8, "x={x}: {b} vs {fd}");
        }
    }

    #[test]
    fn nonlinear_diffusion_at_origin() {
        assert_eq!(eval(BuiltinModel::NonlinearDiffusion, 0.0).1, 1.0);
    }

    #[test]
    fn observation_is_identity() {
        for m in BuiltinModel::ALL {
            assert_eq!(eval(m, 0.3).2, 0.3);
            assert_eq!((m.state_dim(), m.obs_dim()), (1, 1));
        }
    }

    #[test]
    fn sigma_constant_flags() {
        assert!(BuiltinModel::OrnsteinUhlenbeck.sigma_constant());
        assert!(BuiltinModel::Langevin.sigma_constant());
        assert!(!BuiltinModel::GeometricBrownian.sigma_constant());
        assert!(!BuiltinModel::NonlinearDiffusion.sigma_constant());
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!(builtin_model("heston"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn names_round_trip() {
        for m in BuiltinModel::ALL {
            assert_eq!(builtin_model(m.name()).unwrap(), m);
        }
    }

    #[test]
    fn ellipticity_on_grid() {
        // GBM degenerates at 0 so it is checked on the positive half line it lives on.
        for m in BuiltinModel::ALL {
            let grid: Vec<f64> = match m {
                BuiltinModel::GeometricBrownian => (1..=50).map(|i| i as f64 * 0.1).collect(),
                _ => (-50..=50).map(|i| i as f64 * 0.1).collect(),
            };
            let min = grid
                .iter()
                .map(|&x| diffusion_covariance(&m, &[x])[0])
                .fold(f64::INFINITY, f64::min);
            assert!(min > 1e-4, "{m}: {min}");
        }
    }

    #[test]
    fn custom_model_dimension_checks() {
        let bad = CustomModel::new(2, 1, vec![0.0], |_, _| {}, |_, _| {}, |_, _| {});
        assert!(matches!(bad, Err(Error::Shape { expected: 2, found: 1 })));
    }
}

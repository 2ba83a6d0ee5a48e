//! Observation paths and the discretized Girsanov weights.
//!
//! The path stores the increments of `Y` on the finest grid
//! `Δ = 2^-finest_level`. Coarser increments are sums of consecutive fine
//! increments, always accumulated left to right starting from `0.0`, so any
//! two queries for the same coarse increment agree bit-for-bit.
//!
//! At level `l` with `Δ_l = 2^-l`, step `k` carries the log weight
//!
//! ```text
//! log G_k(x) = h(x)·(y_{(k+1)Δ_l} - y_{kΔ_l}) - (Δ_l / 2) |h(x)|²
//! ```
//!
//! and a unit block `[p, p+1]` weighs its first `2^l` states (the terminal
//! state only seeds the next block).

use alloc::vec;
use alloc::vec::Vec;

use crate::euler::PathBlock;
use crate::models::SdeModel;
use crate::rng::{sim_rng, standard_normal};
use crate::{Error, Result};

#[inline]
pub fn step_size(level: u32) -> f64 {
    libm::ldexp(1.0, -(level as i32))
}

#[inline]
pub fn steps_per_unit(level: u32) -> usize {
    1usize << level
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPath {
    finest_level: u32,
    horizon: usize,
    obs_dim: usize,
    increments: Vec<f64>,
    seed: Option<u64>,
}

impl ObservationPath {
    /// Brownian increments on `[0, horizon]` at resolution `2^-finest_level`.
    pub fn simulate(seed: u64, horizon: usize, finest_level: u32, obs_dim: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1"));
        }
        if obs_dim == 0 {
            return Err(Error::Config("observation dimension must be positive"));
        }
        if finest_level > 30 {
            return Err(Error::Config("finest level is limited to 30"));
        }
        let n = horizon * steps_per_unit(finest_level) * obs_dim;
        let scale = libm::sqrt(step_size(finest_level));
        let mut rng = sim_rng(seed);
        let increments = (0..n).map(|_| scale * standard_normal(&mut rng)).collect();
        Ok(ObservationPath {
            finest_level,
            horizon,
            obs_dim,
            increments,
            seed: Some(seed),
        })
    }

    /// Wraps externally supplied increments (row-major, `obs_dim` per step).
    pub fn from_increments(finest_level: u32, horizon: usize, obs_dim: usize, increments: Vec<f64>) -> Result<Self> {
        if horizon == 0 || obs_dim == 0 {
            return Err(Error::Config("horizon and observation dimension must be positive"));
        }
        if finest_level > 30 {
            return Err(Error::Config("finest level is limited to 30"));
        }
        let expected = horizon * steps_per_unit(finest_level) * obs_dim;
        if increments.len() != expected {
            return Err(Error::Shape {
                expected,
                found: increments.len(),
            });
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("observation increments must be finite"));
        }
        Ok(ObservationPath {
            finest_level,
            horizon,
            obs_dim,
            increments,
            seed: None,
        })
    }

    pub fn finest_level(&self) -> u32 {
        self.finest_level
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Finest increments, `obs_dim` values per step.
    pub fn fine_increments(&self) -> &[f64] {
        &self.increments
    }

    /// Number of steps on `[0, horizon]` at `level`.
    pub fn steps_at(&self, level: u32) -> usize {
        self.horizon * steps_per_unit(level)
    }

    fn check_level(&self, level: u32) -> Result<()> {
        if level > self.finest_level {
            Err(Error::Resolution {
                requested: level,
                finest: self.finest_level,
            })
        } else {
            Ok(())
        }
    }

    /// `y_{(k+1)Δ_l} - y_{kΔ_l}` written into `out`.
    pub fn increment_into(&self, level: u32, k: usize, out: &mut [f64]) -> Result<()> {
        self.check_level(level)?;
        if k >= self.steps_at(level) {
            return Err(Error::Horizon {
                requested: k,
                horizon: self.steps_at(level),
            });
        }
        let d = self.obs_dim;
        if out.len() != d {
            return Err(Error::Shape {
                expected: d,
                found: out.len(),
            });
        }
        let ratio = 1usize << (self.finest_level - level);
        out.fill(0.0);
        for j in k * ratio..(k + 1) * ratio {
            for (o, v) in out.iter_mut().zip(&self.increments[j * d..(j + 1) * d]) {
                *o += *v;
            }
        }
        Ok(())
    }

    pub fn increment(&self, level: u32, k: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.obs_dim];
        self.increment_into(level, k, &mut out)?;
        Ok(out)
    }

    /// All increments at `level`, summed the same way as [`increment`](Self::increment).
    pub fn at_level(&self, level: u32) -> Result<LevelIncrements> {
        self.check_level(level)?;
        let d = self.obs_dim;
        let ratio = 1usize << (self.finest_level - level);
        let steps = self.steps_at(level);
        let mut values = vec![0.0; steps * d];
        for k in 0..steps {
            let out = &mut values[k * d..(k + 1) * d];
            for j in k * ratio..(k + 1) * ratio {
                for (o, v) in out.iter_mut().zip(&self.increments[j * d..(j + 1) * d]) {
                    *o += *v;
                }
            }
        }
        Ok(LevelIncrements {
            level,
            obs_dim: d,
            values,
        })
    }
}

/// The increments of a path at one level, materialized for a filter run.
#[derive(Debug, Clone)]
pub struct LevelIncrements {
    level: u32,
    obs_dim: usize,
    values: Vec<f64>,
}

impl LevelIncrements {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn steps(&self) -> usize {
        self.values.len() / self.obs_dim
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.values[k * self.obs_dim..(k + 1) * self.obs_dim]
    }

    /// Log weight of a unit block; `h` is scratch of length `obs_dim`.
    pub(crate) fn block_log_weight<M: SdeModel + ?Sized>(&self, model: &M, block: &PathBlock, h: &mut [f64]) -> f64 {
        let n = steps_per_unit(self.level);
        let delta = step_size(self.level);
        let base = block.start_time() * n;
        (0..n)
            .map(|k| log_g_with(model, self.get(base + k), delta, block.state(k), h))
            .sum()
    }
}

#[inline]
fn log_g_with<M: SdeModel + ?Sized>(model: &M, dy: &[f64], delta: f64, x: &[f64], h: &mut [f64]) -> f64 {
    model.observation(x, h);
    let mut cross = 0.0;
    let mut sq = 0.0;
    for (hi, yi) in h.iter().zip(dy) {
        cross += hi * yi;
        sq += hi * hi;
    }
    cross - 0.5 * delta * sq
}

/// `log G_k^l(x)` for step `k` at `level`.
pub fn log_weight_g<M: SdeModel + ?Sized>(
    model: &M,
    path: &ObservationPath,
    level: u32,
    k: usize,
    x: &[f64],
) -> Result<f64> {
    if x.len() != model.state_dim() {
        return Err(Error::Shape {
            expected: model.state_dim(),
            found: x.len(),
        });
    }
    let dy = path.increment(level, k)?;
    let mut h = vec![0.0; model.obs_dim()];
    Ok(log_g_with(model, &dy, step_size(level), x, &mut h))
}

/// Log of the block weight for the unit interval `[p, p+1]` at `level`.
pub fn log_block_weight<M: SdeModel + ?Sized>(
    model: &M,
    path: &ObservationPath,
    level: u32,
    p: usize,
    block: &PathBlock,
) -> Result<f64> {
    if block.level() != level {
        return Err(Error::Shape {
            expected: steps_per_unit(level) + 1,
            found: block.len(),
        });
    }
    if block.start_time() != p {
        return Err(Error::Config("block does not start at the requested unit time"));
    }
    if block.dim() != model.state_dim() {
        return Err(Error::Shape {
            expected: model.state_dim(),
            found: block.dim(),
        });
    }
    if p >= path.horizon() {
        return Err(Error::Horizon {
            requested: p + 1,
            horizon: path.horizon(),
        });
    }
    let n = steps_per_unit(level);
    let mut total = 0.0;
    for k in 0..n {
        total += log_weight_g(model, path, level, p * n + k, block.state(k))?;
    }
    Ok(total)
}

/// `log Z_T^l` of a full trajectory on `[0, T]`, given as `T·2^l + 1`
/// row-major states.
pub fn log_z_discretized<M: SdeModel + ?Sized>(
    model: &M,
    path: &ObservationPath,
    level: u32,
    trajectory: &[f64],
) -> Result<f64> {
    let d = model.state_dim();
    if !trajectory.len().is_multiple_of(d) || trajectory.len() < 2 * d {
        return Err(Error::Shape {
            expected: 2 * d,
            found: trajectory.len(),
        });
    }
    let n_states = trajectory.len() / d;
    let steps = n_states - 1;
    let per_unit = steps_per_unit(level);
    if !steps.is_multiple_of(per_unit) {
        return Err(Error::Shape {
            expected: (steps / per_unit + 1) * per_unit + 1,
            found: n_states,
        });
    }
    let horizon = steps / per_unit;
    if horizon > path.horizon() {
        return Err(Error::Horizon {
            requested: horizon,
            horizon: path.horizon(),
        });
    }
    let mut total = 0.0;
    for k in 0..steps {
        total += log_weight_g(model, path, level, k, &trajectory[k * d..(k + 1) * d])?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BuiltinModel;

    #[test]
    fn simulated_path_has_expected_length_and_is_deterministic() {
        let a = ObservationPath::simulate(1, 2, 3, 1).unwrap();
        let b = ObservationPath::simulate(1, 2, 3, 1).unwrap();
        assert_eq!(a.fine_increments().len(), 16);
        assert_eq!(a, b);
        assert_eq!(a.seed(), Some(1));
    }

    #[test]
    fn coarse_increment_is_sum_of_fine() {
        let p = ObservationPath::simulate(1, 2, 3, 1).unwrap();
        let fine = p.fine_increments();
        let mut s = 0.0;
        for v in &fine[0..2] {
            s += v;
        }
        assert_eq!(p.increment(2, 0).unwrap()[0], s);
        assert_eq!(p.increment(3, 5).unwrap()[0], fine[5]);
    }

    #[test]
    fn level_above_data_is_an_error() {
        let p = ObservationPath::simulate(1, 2, 3, 1).unwrap();
        assert_eq!(
            p.increment(4, 0),
            Err(Error::Resolution {
                requested: 4,
                finest: 3
            })
        );
        assert!(p.at_level(4).is_err());
        assert!(log_weight_g(&BuiltinModel::OrnsteinUhlenbeck, &p, 4, 0, &[0.0]).is_err());
    }

    #[test]
    fn step_index_out_of_range() {
        let p = ObservationPath::simulate(1, 2, 3, 1).unwrap();
        assert!(p.increment(1, 4).is_err());
        assert!(p.increment(1, 3).is_ok());
    }

    #[test]
    fn bulk_and_single_increments_agree_bitwise() {
        let p = ObservationPath::simulate(9, 3, 6, 2).unwrap();
        for level in 0..=6 {
            let bulk = p.at_level(level).unwrap();
            for k in 0..p.steps_at(level) {
                let single = p.increment(level, k).unwrap();
                assert_eq!(bulk.get(k), single.as_slice());
            }
        }
    }

    #[test]
    fn weight_vanishes_at_origin() {
        let p = ObservationPath::simulate(3, 1, 2, 1).unwrap();
        let w = log_weight_g(&BuiltinModel::OrnsteinUhlenbeck, &p, 1, 1, &[0.0]).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn weight_direct_evaluation() {
        // level 1 (Δ = 0.5) built from a level-1 path whose first increment is 0.2
        let p = ObservationPath::from_increments(1, 1, 1, vec![0.2, -0.1]).unwrap();
        let w = log_weight_g(&BuiltinModel::OrnsteinUhlenbeck, &p, 1, 0, &[1.0]).unwrap();
        assert!((w - (-0.05)).abs() < 1e-15);
    }

    #[test]
    fn from_increments_validates_length() {
        let err = ObservationPath::from_increments(2, 1, 1, vec![0.0; 3]).unwrap_err();
        assert_eq!(err, Error::Shape { expected: 4, found: 3 });
    }
}

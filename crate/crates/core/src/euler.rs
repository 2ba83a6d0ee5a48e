//! Euler kernels on unit time blocks.
//!
//! Random number contract: a block at level `l` draws exactly `2^l` Gaussian
//! vectors of dimension `d_x`, one per fine sub-step, in time order and
//! component order. The coupled kernel draws the same sequence and builds the
//! coarse path from pairwise sums of the fine increments, so its fine path is
//! bitwise identical to [`euler_block`] fed with the same stream.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::models::SdeModel;
use crate::observations::{step_size, steps_per_unit};
use crate::rng::standard_normal;
use crate::{Error, Result};

/// One particle's Euler path over `[start_time, start_time + 1]`:
/// `2^level + 1` states, the first being the seeding position.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBlock {
    level: u32,
    start_time: usize,
    dim: usize,
    states: Vec<f64>,
}

impl PathBlock {
    /// Builds a block from row-major states.
    pub fn from_states(level: u32, start_time: usize, dim: usize, states: Vec<f64>) -> Result<Self> {
        let expected = (steps_per_unit(level) + 1) * dim;
        if dim == 0 || states.len() != expected {
            return Err(Error::Shape {
                expected,
                found: states.len(),
            });
        }
        Ok(PathBlock {
            level,
            start_time,
            dim,
            states,
        })
    }

    /// A block sitting at `x` for the whole unit interval.
    pub fn constant(level: u32, start_time: usize, x: &[f64]) -> Self {
        let n = steps_per_unit(level) + 1;
        let mut states = Vec::with_capacity(n * x.len());
        for _ in 0..n {
            states.extend_from_slice(x);
        }
        PathBlock {
            level,
            start_time,
            dim: x.len(),
            states,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn start_time(&self) -> usize {
        self.start_time
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of states, `2^level + 1`.
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State at `start_time + k Δ_l`.
    #[inline]
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }
}

struct Scratch {
    drift: Vec<f64>,
    sigma: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Scratch {
            drift: vec![0.0; d],
            sigma: vec![0.0; d * d],
        }
    }
}

/// `next = prev + b(prev) Δ + σ(prev) v`.
#[inline]
fn euler_step<M: SdeModel + ?Sized>(
    model: &M,
    prev: &[f64],
    delta: f64,
    v: &[f64],
    next: &mut [f64],
    scratch: &mut Scratch,
) {
    let d = prev.len();
    model.drift(prev, &mut scratch.drift);
    model.diffusion(prev, &mut scratch.sigma);
    for i in 0..d {
        let row = &scratch.sigma[i * d..(i + 1) * d];
        let noise = row.iter().zip(v.iter()).fold(0.0, |acc, (s, z)| acc + s * z);
        next[i] = prev[i] + scratch.drift[i] * delta + noise;
    }
}

#[inline]
fn draw_increment<R: Rng + ?Sized>(rng: &mut R, scale: f64, v: &mut [f64]) {
    for vi in v.iter_mut() {
        *vi = scale * standard_normal(rng);
    }
}

/// Samples the Euler path on `[start_time, start_time + 1]` at `level`,
/// started from `x`.
pub fn euler_block<M, R>(model: &M, level: u32, start_time: usize, x: &[f64], rng: &mut R) -> PathBlock
where
    M: SdeModel + ?Sized,
    R: Rng + ?Sized,
{
    let d = model.state_dim();
    assert_eq!(x.len(), d, "seed state has the wrong dimension");
    let n = steps_per_unit(level);
    let delta = step_size(level);
    let scale = libm::sqrt(delta);
    let mut states = vec![0.0; (n + 1) * d];
    states[..d].copy_from_slice(x);
    let mut v = vec![0.0; d];
    let mut scratch = Scratch::new(d);
    for k in 1..=n {
        draw_increment(rng, scale, &mut v);
        let (head, tail) = states.split_at_mut(k * d);
        euler_step(model, &head[(k - 1) * d..], delta, &v, &mut tail[..d], &mut scratch);
    }
    PathBlock {
        level,
        start_time,
        dim: d,
        states,
    }
}

/// Samples Euler paths at `level` (from `x_fine`) and `level - 1` (from
/// `x_coarse`) driven by the same Brownian increments.
pub fn coupled_euler_block<M, R>(
    model: &M,
    level: u32,
    start_time: usize,
    x_fine: &[f64],
    x_coarse: &[f64],
    rng: &mut R,
) -> Result<(PathBlock, PathBlock)>
where
    M: SdeModel + ?Sized,
    R: Rng + ?Sized,
{
    if level == 0 {
        return Err(Error::Level);
    }
    let d = model.state_dim();
    for x in [x_fine, x_coarse] {
        if x.len() != d {
            return Err(Error::Shape {
                expected: d,
                found: x.len(),
            });
        }
    }
    let n = steps_per_unit(level);
    let delta = step_size(level);
    let coarse_delta = step_size(level - 1);
    let scale = libm::sqrt(delta);

    let mut fine = vec![0.0; (n + 1) * d];
    let mut coarse = vec![0.0; (n / 2 + 1) * d];
    fine[..d].copy_from_slice(x_fine);
    coarse[..d].copy_from_slice(x_coarse);

    let mut v = vec![0.0; d];
    let mut v_pair = vec![0.0; d];
    let mut scratch = Scratch::new(d);
    for k in 1..=n {
        draw_increment(rng, scale, &mut v);
        let (head, tail) = fine.split_at_mut(k * d);
        euler_step(model, &head[(k - 1) * d..], delta, &v, &mut tail[..d], &mut scratch);
        if k % 2 == 1 {
            v_pair.copy_from_slice(&v);
        } else {
            for (a, b) in v_pair.iter_mut().zip(&v) {
                *a += *b;
            }
            let c = k / 2;
            let (head, tail) = coarse.split_at_mut(c * d);
            euler_step(
                model,
                &head[(c - 1) * d..],
                coarse_delta,
                &v_pair,
                &mut tail[..d],
                &mut scratch,
            );
        }
    }
    Ok((
        PathBlock {
            level,
            start_time,
            dim: d,
            states: fine,
        },
        PathBlock {
            level: level - 1,
            start_time,
            dim: d,
            states: coarse,
        },
    ))
}

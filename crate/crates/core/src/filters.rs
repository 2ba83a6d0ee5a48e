//! Particle filter and coupled particle filter on unit time blocks.
//!
//! Both filters keep, per particle, the log of the weight accumulated since
//! the last resampling, and a running log normalizing constant that absorbs
//! the mean weight at every resampling time. At integer time `t` the
//! estimates are
//!
//! ```text
//! η_t(φ) = Σ_i w̄_i φ(x_t^i)                      (w̄ normalized weights)
//! γ_t(φ) = exp(log_gamma_running) · N⁻¹ Σ_i w_i φ(x_t^i)
//! ```
//!
//! With [`ResamplingPolicy::EveryUnit`] the weights are exactly the last
//! block weights and `γ_t` is the usual product of averaged block weights.
//! With [`ResamplingPolicy::EssThreshold`] resampling only happens when the
//! effective sample size (the minimum over both levels for the coupled
//! filter) falls below the threshold fraction of `N`.
//!
//! A resampling decision is taken at time `t` once the estimates are formed;
//! the index draws and propagation happen when the filter is advanced to
//! `t + 1`, so the last reported time consumes no randomness.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::euler::{coupled_euler_block, euler_block, PathBlock};
use crate::models::SdeModel;
use crate::observations::{steps_per_unit, LevelIncrements, ObservationPath};
use crate::resampling::{ess, log_mean_exp, normalize, Categorical, MaximalCoupling};
use crate::rng::{sim_rng, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResamplingPolicy {
    /// Resample after every unit of time.
    EveryUnit,
    /// Resample when `ESS < fraction · N`.
    EssThreshold(f64),
}

impl Default for ResamplingPolicy {
    fn default() -> Self {
        ResamplingPolicy::EssThreshold(0.25)
    }
}

impl ResamplingPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ResamplingPolicy::EveryUnit => Ok(()),
            ResamplingPolicy::EssThreshold(f) if f > 0.0 && f <= 1.0 => Ok(()),
            ResamplingPolicy::EssThreshold(_) => Err(Error::Config("ESS threshold must lie in (0, 1]")),
        }
    }

    pub fn fires(&self, ess: f64, particles: usize) -> bool {
        match *self {
            ResamplingPolicy::EveryUnit => true,
            ResamplingPolicy::EssThreshold(f) => ess < f * particles as f64,
        }
    }
}

impl fmt::Display for ResamplingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResamplingPolicy::EveryUnit => f.write_str("every"),
            ResamplingPolicy::EssThreshold(x) => write!(f, "ess:{x}"),
        }
    }
}

impl FromStr for ResamplingPolicy {
    type Err = Error;

    /// `every` or `ess:<fraction>` (`ess` alone means `ess:0.25`).
    fn from_str(s: &str) -> Result<Self> {
        let policy = match s.trim() {
            "every" | "every_unit" | "always" => ResamplingPolicy::EveryUnit,
            "ess" => ResamplingPolicy::default(),
            other => {
                let frac = other
                    .strip_prefix("ess:")
                    .ok_or(Error::Config("policy must be `every` or `ess:<fraction>`"))?;
                let frac: f64 = frac
                    .parse()
                    .map_err(|_| Error::Config("ESS fraction is not a number"))?;
                ResamplingPolicy::EssThreshold(frac)
            }
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// The function `φ` whose filter and unnormalized filter are estimated.
#[derive(Clone, Copy)]
pub enum TestFunction {
    One,
    /// First state coordinate.
    Identity,
    Coordinate(usize),
    Custom(fn(&[f64]) -> f64),
}

impl TestFunction {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Identity => x[0],
            TestFunction::Coordinate(i) => x[*i],
            TestFunction::Custom(f) => f(x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::Identity => "identity",
            TestFunction::Coordinate(_) => "coordinate",
            TestFunction::Custom(_) => "custom",
        }
    }

    /// `Σ_i p_i φ(x_i)`; exactly 1 for `φ ≡ 1`.
    fn weighted_mean(&self, pmf: &[f64], blocks: &[PathBlock]) -> f64 {
        match self {
            TestFunction::One => 1.0,
            _ => pmf.iter().zip(blocks).map(|(p, b)| p * self.eval(b.terminal())).sum(),
        }
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Coordinate(i) => write!(f, "Coordinate({i})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "1" => Ok(TestFunction::One),
            "identity" | "x" => Ok(TestFunction::Identity),
            _ => s
                .strip_prefix("coord:")
                .and_then(|i| i.parse().ok())
                .map(TestFunction::Coordinate)
                .ok_or(Error::Config("test function must be `one`, `identity` or `coord:<i>`")),
        }
    }
}

/// Estimates of one filter at one integer time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterStep {
    pub time: usize,
    /// `η_t(φ)`.
    pub eta_phi: f64,
    /// `log γ_t(1)`.
    pub log_gamma_one: f64,
    pub ess: f64,
    /// Whether the policy fired at this time.
    pub resampled: bool,
}

impl FilterStep {
    pub fn gamma_one(&self) -> f64 {
        libm::exp(self.log_gamma_one)
    }

    /// `γ_t(φ) = γ_t(1) η_t(φ)`.
    pub fn gamma_phi(&self) -> f64 {
        self.gamma_one() * self.eta_phi
    }

    /// `log |γ_t(φ)|`; the sign is that of `eta_phi`.
    pub fn log_abs_gamma_phi(&self) -> f64 {
        self.log_gamma_one + libm::log(libm::fabs(self.eta_phi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub level: u32,
    pub particles: usize,
    pub steps: Vec<FilterStep>,
    /// `t · N · 2^level`.
    pub cost: f64,
}

impl FilterOutput {
    pub fn at(&self, t: usize) -> Option<&FilterStep> {
        t.checked_sub(1).and_then(|i| self.steps.get(i))
    }
}

fn check_run(path: &ObservationPath, level: u32, particles: usize, policy: &ResamplingPolicy) -> Result<()> {
    if level > path.finest_level() {
        return Err(Error::Resolution {
            requested: level,
            finest: path.finest_level(),
        });
    }
    if particles == 0 {
        return Err(Error::Config("need at least one particle"));
    }
    policy.validate()
}

fn check_time(t_max: usize, path: &ObservationPath) -> Result<()> {
    if t_max == 0 {
        return Err(Error::Config("t_max must be at least 1"));
    }
    if t_max > path.horizon() {
        return Err(Error::Horizon {
            requested: t_max,
            horizon: path.horizon(),
        });
    }
    Ok(())
}

fn degenerate_at(time: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Degenerate { .. } | Error::InvalidPmf => Error::Degenerate { time },
        other => other,
    }
}

/// Level-`l` particle filter stepping through unit times.
pub struct ParticleFilter<'m, M: SdeModel + ?Sized> {
    model: &'m M,
    increments: LevelIncrements,
    horizon: usize,
    level: u32,
    policy: ResamplingPolicy,
    rng: SimRng,
    blocks: Vec<PathBlock>,
    log_weights: Vec<f64>,
    pmf: Vec<f64>,
    log_gamma_running: f64,
    time: usize,
    resample_pending: bool,
    h: Vec<f64>,
}

impl<'m, M: SdeModel + ?Sized> ParticleFilter<'m, M> {
    /// Draws `particles` blocks on `[0, 1]` from `x_*`.
    pub fn new(
        model: &'m M,
        path: &ObservationPath,
        level: u32,
        particles: usize,
        policy: ResamplingPolicy,
        seed: u64,
    ) -> Result<Self> {
        check_run(path, level, particles, &policy)?;
        if path.obs_dim() != model.obs_dim() {
            return Err(Error::Shape {
                expected: model.obs_dim(),
                found: path.obs_dim(),
            });
        }
        let mut rng = sim_rng(seed);
        let x0 = model.initial_state();
        let blocks = (0..particles)
            .map(|_| euler_block(model, level, 0, x0, &mut rng))
            .collect();
        Ok(ParticleFilter {
            model,
            increments: path.at_level(level)?,
            horizon: path.horizon(),
            level,
            policy,
            rng,
            blocks,
            log_weights: vec![0.0; particles],
            pmf: Vec::new(),
            log_gamma_running: 0.0,
            time: 0,
            resample_pending: false,
            h: vec![0.0; model.obs_dim()],
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn particles(&self) -> usize {
        self.blocks.len()
    }

    /// Last integer time with estimates, 0 before the first [`advance`](Self::advance).
    pub fn time(&self) -> usize {
        self.time
    }

    pub fn blocks(&self) -> &[PathBlock] {
        &self.blocks
    }

    /// Log weights accumulated since the last resampling.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_gamma_running(&self) -> f64 {
        self.log_gamma_running
    }

    /// Block terminal states, i.e. the particles at the current time.
    pub fn terminal_states(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.terminal().iter().copied()).collect()
    }

    fn propagate(&mut self) -> Result<()> {
        let start = self.time;
        let seeds: Vec<usize> = if self.resample_pending {
            self.log_gamma_running += log_mean_exp(&self.log_weights);
            let cat = Categorical::new(&self.pmf).map_err(degenerate_at(start))?;
            let idx = (0..self.blocks.len()).map(|_| cat.sample(&mut self.rng)).collect();
            self.log_weights.fill(0.0);
            idx
        } else {
            (0..self.blocks.len()).collect()
        };
        let model = self.model;
        let level = self.level;
        let next: Vec<PathBlock> = seeds
            .iter()
            .map(|&i| euler_block(model, level, start, self.blocks[i].terminal(), &mut self.rng))
            .collect();
        self.blocks = next;
        Ok(())
    }

    /// Moves to the next integer time and returns the estimates there.
    pub fn advance(&mut self, phi: &TestFunction) -> Result<FilterStep> {
        if self.time >= self.horizon {
            return Err(Error::Horizon {
                requested: self.time + 1,
                horizon: self.horizon,
            });
        }
        if self.time > 0 {
            self.propagate()?;
        }
        for (lw, block) in self.log_weights.iter_mut().zip(&self.blocks) {
            *lw += self.increments.block_log_weight(self.model, block, &mut self.h);
        }
        self.time += 1;
        let time = self.time;
        self.pmf = normalize(&self.log_weights).map_err(degenerate_at(time))?;
        let ess = ess(&self.pmf);
        let log_gamma_one = self.log_gamma_running + log_mean_exp(&self.log_weights);
        if !log_gamma_one.is_finite() {
            return Err(Error::Degenerate { time });
        }
        self.resample_pending = self.policy.fires(ess, self.blocks.len());
        Ok(FilterStep {
            time,
            eta_phi: phi.weighted_mean(&self.pmf, &self.blocks),
            log_gamma_one,
            ess,
            resampled: self.resample_pending,
        })
    }
}

/// Runs the level-`l` particle filter up to `t_max`.
#[allow(clippy::too_many_arguments)]
pub fn pf_run<M: SdeModel + ?Sized>(
    model: &M,
    path: &ObservationPath,
    level: u32,
    particles: usize,
    t_max: usize,
    policy: ResamplingPolicy,
    phi: &TestFunction,
    seed: u64,
) -> Result<FilterOutput> {
    check_time(t_max, path)?;
    let mut pf = ParticleFilter::new(model, path, level, particles, policy, seed)?;
    let steps = (0..t_max).map(|_| pf.advance(phi)).collect::<Result<Vec<_>>>()?;
    Ok(FilterOutput {
        level,
        particles,
        steps,
        cost: (t_max * particles * steps_per_unit(level)) as f64,
    })
}

/// Fine and coarse estimates of the coupled filter at one integer time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledStep {
    pub time: usize,
    pub fine: FilterStep,
    pub coarse: FilterStep,
    /// `min(ESS_fine, ESS_coarse)`.
    pub ess_min: f64,
    pub resampled: bool,
}

impl CoupledStep {
    /// `[η^l - η^{l-1}](φ)`.
    pub fn eta_diff(&self) -> f64 {
        self.fine.eta_phi - self.coarse.eta_phi
    }

    /// `[γ^l - γ^{l-1}](φ)`.
    pub fn gamma_phi_diff(&self) -> f64 {
        self.fine.gamma_phi() - self.coarse.gamma_phi()
    }

    /// `[γ^l - γ^{l-1}](1)`.
    pub fn gamma_one_diff(&self) -> f64 {
        self.fine.gamma_one() - self.coarse.gamma_one()
    }
}

/// Summary of one coupled resampling event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledResample {
    pub time: usize,
    /// `Σ_i min(p_fine_i, p_coarse_i)`.
    pub overlap: f64,
    /// Fraction of pairs whose fine and coarse indices coincide.
    pub meet_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledFilterOutput {
    pub level: u32,
    pub particles: usize,
    pub steps: Vec<CoupledStep>,
    pub resamples: Vec<CoupledResample>,
    /// `t · N · 2^level`.
    pub cost: f64,
}

impl CoupledFilterOutput {
    pub fn at(&self, t: usize) -> Option<&CoupledStep> {
        t.checked_sub(1).and_then(|i| self.steps.get(i))
    }
}

struct LevelState {
    increments: LevelIncrements,
    blocks: Vec<PathBlock>,
    log_weights: Vec<f64>,
    pmf: Vec<f64>,
    log_gamma_running: f64,
}

impl LevelState {
    fn weigh<M: SdeModel + ?Sized>(&mut self, model: &M, h: &mut [f64]) {
        for (lw, block) in self.log_weights.iter_mut().zip(&self.blocks) {
            *lw += self.increments.block_log_weight(model, block, h);
        }
    }

    fn estimate(&mut self, time: usize, phi: &TestFunction, resampled: bool) -> Result<FilterStep> {
        self.pmf = normalize(&self.log_weights).map_err(degenerate_at(time))?;
        let log_gamma_one = self.log_gamma_running + log_mean_exp(&self.log_weights);
        if !log_gamma_one.is_finite() {
            return Err(Error::Degenerate { time });
        }
        Ok(FilterStep {
            time,
            eta_phi: phi.weighted_mean(&self.pmf, &self.blocks),
            log_gamma_one,
            ess: ess(&self.pmf),
            resampled,
        })
    }

    fn absorb_and_reset(&mut self) {
        self.log_gamma_running += log_mean_exp(&self.log_weights);
        self.log_weights.fill(0.0);
    }
}

/// Coupled particle filter at levels `l` and `l - 1`.
pub struct CoupledParticleFilter<'m, M: SdeModel + ?Sized> {
    model: &'m M,
    horizon: usize,
    level: u32,
    policy: ResamplingPolicy,
    rng: SimRng,
    fine: LevelState,
    coarse: LevelState,
    time: usize,
    resample_pending: bool,
    resamples: Vec<CoupledResample>,
    h: Vec<f64>,
}

impl<'m, M: SdeModel + ?Sized> CoupledParticleFilter<'m, M> {
    pub fn new(
        model: &'m M,
        path: &ObservationPath,
        level: u32,
        particles: usize,
        policy: ResamplingPolicy,
        seed: u64,
    ) -> Result<Self> {
        if level == 0 {
            return Err(Error::Level);
        }
        check_run(path, level, particles, &policy)?;
        if path.obs_dim() != model.obs_dim() {
            return Err(Error::Shape {
                expected: model.obs_dim(),
                found: path.obs_dim(),
            });
        }
        let mut rng = sim_rng(seed);
        let x0 = model.initial_state();
        let mut fine_blocks = Vec::with_capacity(particles);
        let mut coarse_blocks = Vec::with_capacity(particles);
        for _ in 0..particles {
            let (f, c) = coupled_euler_block(model, level, 0, x0, x0, &mut rng)?;
            fine_blocks.push(f);
            coarse_blocks.push(c);
        }
        let state = |increments, blocks| LevelState {
            increments,
            blocks,
            log_weights: vec![0.0; particles],
            pmf: Vec::new(),
            log_gamma_running: 0.0,
        };
        Ok(CoupledParticleFilter {
            model,
            horizon: path.horizon(),
            level,
            policy,
            rng,
            fine: state(path.at_level(level)?, fine_blocks),
            coarse: state(path.at_level(level - 1)?, coarse_blocks),
            time: 0,
            resample_pending: false,
            resamples: Vec::new(),
            h: vec![0.0; model.obs_dim()],
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn particles(&self) -> usize {
        self.fine.blocks.len()
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn fine_blocks(&self) -> &[PathBlock] {
        &self.fine.blocks
    }

    pub fn coarse_blocks(&self) -> &[PathBlock] {
        &self.coarse.blocks
    }

    pub fn fine_log_weights(&self) -> &[f64] {
        &self.fine.log_weights
    }

    pub fn coarse_log_weights(&self) -> &[f64] {
        &self.coarse.log_weights
    }

    pub fn resamples(&self) -> &[CoupledResample] {
        &self.resamples
    }

    fn propagate(&mut self) -> Result<()> {
        let start = self.time;
        let n = self.fine.blocks.len();
        let pairs: Vec<(usize, usize)> = if self.resample_pending {
            let coupling = MaximalCoupling::new(&self.fine.pmf, &self.coarse.pmf).map_err(degenerate_at(start))?;
            let pairs: Vec<(usize, usize)> = (0..n).map(|_| coupling.sample(&mut self.rng)).collect();
            let meets = pairs.iter().filter(|(i, j)| i == j).count();
            self.resamples.push(CoupledResample {
                time: start,
                overlap: coupling.overlap(),
                meet_fraction: meets as f64 / n as f64,
            });
            self.fine.absorb_and_reset();
            self.coarse.absorb_and_reset();
            pairs
        } else {
            (0..n).map(|i| (i, i)).collect()
        };
        let mut fine_next = Vec::with_capacity(n);
        let mut coarse_next = Vec::with_capacity(n);
        for &(i, j) in &pairs {
            let (f, c) = coupled_euler_block(
                self.model,
                self.level,
                start,
                self.fine.blocks[i].terminal(),
                self.coarse.blocks[j].terminal(),
                &mut self.rng,
            )?;
            fine_next.push(f);
            coarse_next.push(c);
        }
        self.fine.blocks = fine_next;
        self.coarse.blocks = coarse_next;
        Ok(())
    }

    pub fn advance(&mut self, phi: &TestFunction) -> Result<CoupledStep> {
        if self.time >= self.horizon {
            return Err(Error::Horizon {
                requested: self.time + 1,
                horizon: self.horizon,
            });
        }
        if self.time > 0 {
            self.propagate()?;
        }
        self.fine.weigh(self.model, &mut self.h);
        self.coarse.weigh(self.model, &mut self.h);
        self.time += 1;
        let time = self.time;
        let mut fine = self.fine.estimate(time, phi, false)?;
        let mut coarse = self.coarse.estimate(time, phi, false)?;
        let ess_min = fine.ess.min(coarse.ess);
        self.resample_pending = self.policy.fires(ess_min, self.fine.blocks.len());
        fine.resampled = self.resample_pending;
        coarse.resampled = self.resample_pending;
        Ok(CoupledStep {
            time,
            fine,
            coarse,
            ess_min,
            resampled: self.resample_pending,
        })
    }
}

/// Runs the coupled filter at levels `level` and `level - 1` up to `t_max`.
#[allow(clippy::too_many_arguments)]
pub fn cpf_run<M: SdeModel + ?Sized>(
    model: &M,
    path: &ObservationPath,
    level: u32,
    particles: usize,
    t_max: usize,
    policy: ResamplingPolicy,
    phi: &TestFunction,
    seed: u64,
) -> Result<CoupledFilterOutput> {
    check_time(t_max, path)?;
    let mut cpf = CoupledParticleFilter::new(model, path, level, particles, policy, seed)?;
    let steps = (0..t_max).map(|_| cpf.advance(phi)).collect::<Result<Vec<_>>>()?;
    Ok(CoupledFilterOutput {
        level,
        particles,
        steps,
        resamples: cpf.resamples,
        cost: (t_max * particles * steps_per_unit(level)) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BuiltinModel, CustomModel};

    fn blind_ou() -> CustomModel {
        CustomModel::new(
            1,
            1,
            vec![0.0],
            |x, b| b[0] = -x[0],
            |_, s| s[0] = 0.5,
            |_, h| h[0] = 0.0,
        )
        .unwrap()
    }

    fn data() -> ObservationPath {
        ObservationPath::simulate(7, 6, 5, 1).unwrap()
    }

    #[test]
    fn test_function_names_parse() {
        assert!(matches!("one".parse::<TestFunction>(), Ok(TestFunction::One)));
        assert!(matches!("identity".parse::<TestFunction>(), Ok(TestFunction::Identity)));
        assert!(matches!(
            "coord:2".parse::<TestFunction>(),
            Ok(TestFunction::Coordinate(2))
        ));
        assert!("coord:x".parse::<TestFunction>().is_err());
        assert!("square".parse::<TestFunction>().is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!(
            "every".parse::<ResamplingPolicy>().unwrap(),
            ResamplingPolicy::EveryUnit
        );
        assert_eq!(
            "ess:0.5".parse::<ResamplingPolicy>().unwrap(),
            ResamplingPolicy::EssThreshold(0.5)
        );
        assert_eq!(ResamplingPolicy::default(), ResamplingPolicy::EssThreshold(0.25));
        assert!("ess:0".parse::<ResamplingPolicy>().is_err());
        assert!("ess:1.5".parse::<ResamplingPolicy>().is_err());
        assert!("sometimes".parse::<ResamplingPolicy>().is_err());
    }

    #[test]
    fn filter_of_one_is_one() {
        let out = pf_run(
            &BuiltinModel::NonlinearDiffusion,
            &data(),
            2,
            50,
            6,
            ResamplingPolicy::EveryUnit,
            &TestFunction::One,
            1,
        )
        .unwrap();
        assert!(out.steps.iter().all(|s| s.eta_phi == 1.0));
        assert_eq!(out.cost, (6 * 50 * 4) as f64);
    }

    #[test]
    fn unobserved_model_has_unit_normalizing_constant() {
        let out = pf_run(
            &blind_ou(),
            &data(),
            3,
            20,
            6,
            ResamplingPolicy::default(),
            &TestFunction::Identity,
            3,
        )
        .unwrap();
        for s in &out.steps {
            assert_eq!(s.log_gamma_one, 0.0);
            assert!((s.ess - 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn coupled_filter_of_one_has_zero_difference() {
        let out = cpf_run(
            &BuiltinModel::OrnsteinUhlenbeck,
            &data(),
            3,
            40,
            6,
            ResamplingPolicy::default(),
            &TestFunction::One,
            5,
        )
        .unwrap();
        assert!(out.steps.iter().all(|s| s.eta_diff() == 0.0));
    }

    #[test]
    fn run_errors() {
        let path = data();
        let m = BuiltinModel::OrnsteinUhlenbeck;
        let p = ResamplingPolicy::default();
        let phi = TestFunction::One;
        assert!(matches!(
            pf_run(&m, &path, 6, 10, 2, p, &phi, 0),
            Err(Error::Resolution { .. })
        ));
        assert!(matches!(
            pf_run(&m, &path, 1, 10, 7, p, &phi, 0),
            Err(Error::Horizon { .. })
        ));
        assert!(pf_run(&m, &path, 1, 0, 2, p, &phi, 0).is_err());
        assert_eq!(cpf_run(&m, &path, 0, 10, 2, p, &phi, 0).unwrap_err(), Error::Level);
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let path = data();
        let m = BuiltinModel::GeometricBrownian;
        let p = ResamplingPolicy::default();
        let a = cpf_run(&m, &path, 4, 30, 6, p, &TestFunction::Identity, 77).unwrap();
        let b = cpf_run(&m, &path, 4, 30, 6, p, &TestFunction::Identity, 77).unwrap();
        assert_eq!(a, b);
        let c = pf_run(&m, &path, 4, 30, 6, p, &TestFunction::Identity, 77).unwrap();
        let d = pf_run(&m, &path, 4, 30, 6, p, &TestFunction::Identity, 77).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn every_unit_policy_always_resamples() {
        let out = pf_run(
            &BuiltinModel::OrnsteinUhlenbeck,
            &data(),
            1,
            10,
            4,
            ResamplingPolicy::EveryUnit,
            &TestFunction::One,
            2,
        )
        .unwrap();
        assert!(out.steps.iter().all(|s| s.resampled));
    }

    #[test]
    fn collapsed_weights_are_reported() {
        let model = CustomModel::new(
            1,
            1,
            vec![0.0],
            |_, b| b[0] = 0.0,
            |_, s| s[0] = 1.0,
            |_, h| h[0] = f64::NAN,
        )
        .unwrap();
        let err = pf_run(
            &model,
            &data(),
            1,
            5,
            3,
            ResamplingPolicy::EveryUnit,
            &TestFunction::One,
            0,
        )
        .unwrap_err();
        assert_eq!(err, Error::Degenerate { time: 1 });
    }
}

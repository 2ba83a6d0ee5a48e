//! Multilevel and randomized estimators of `γ_t(φ)`.
//!
//! - [`mlpf_run`] combines a level-0 particle filter with independent coupled
//!   filters at levels `1..=L` into the telescoping sum
//!   `γ^0 + Σ_l [γ^l - γ^{l-1}]`, whose expectation is `γ^L`.
//! - [`st_estimate`] draws one level `L ~ P` and returns `Ψ^L / P(L)`.
//! - [`cs_estimate`] draws `L ~ P` and returns `Ψ^0 + Σ_{l=1}^{L} Ψ^l / Q(l)`
//!   with the tail sums `Q(l) = Σ_{q≥l} P(q)`.
//!
//! Here `Ψ^0` is a level-0 particle filter estimate and `Ψ^l` the coupled
//! filter estimate of `[γ^l - γ^{l-1}]`. With `P` supported on `0..=l_max`
//! both randomized estimators are unbiased for `γ^{l_max}`; the truncation
//! is explicit in [`LevelDistribution::max_level`].
//!
//! Seeds: within one estimate with seed `s`, the level-`l` filter uses
//! `derive_seed(s, l)` and the level draw uses
//! `derive_seed(s, LEVEL_DRAW_TAG)`. Replicate `i` of
//! [`replicate_average`] uses `derive_seed(base_seed, i)`. Consequently the
//! single-term and coupled-sum estimators evaluated at the same seed share
//! their `Ψ^l` draws.

use alloc::vec;
use alloc::vec::Vec;

use crate::filters::{cpf_run, pf_run, ResamplingPolicy, TestFunction};
use crate::models::SdeModel;
use crate::observations::{steps_per_unit, ObservationPath};
use crate::resampling::Categorical;
use crate::rng::{derive_seed, sim_rng, LEVEL_DRAW_TAG};
use crate::{Error, Result};

/// Default exponent shift for non-constant diffusion coefficients.
pub const DEFAULT_ALPHA: f64 = 0.25;
/// Default truncation level of the level distribution.
pub const DEFAULT_MAX_LEVEL: u32 = 7;

/// Default particle count for the randomized estimators.
pub fn default_particles(sigma_constant: bool) -> usize {
    if sigma_constant {
        100
    } else {
        200
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelDistributionKind {
    /// `P(l) ∝ 2^-l (l+1) log2(l+2)²`.
    SigmaConstant,
    /// `P(l) ∝ Δ_l^{1/2+α} (l+1) log2(l+2)²` with `0 < α < 1/2`.
    SigmaNonconstant { alpha: f64 },
}

impl LevelDistributionKind {
    pub fn for_model(sigma_constant: bool, alpha: f64) -> Self {
        if sigma_constant {
            LevelDistributionKind::SigmaConstant
        } else {
            LevelDistributionKind::SigmaNonconstant { alpha }
        }
    }

    fn exponent(&self) -> f64 {
        match self {
            LevelDistributionKind::SigmaConstant => 1.0,
            LevelDistributionKind::SigmaNonconstant { alpha } => 0.5 + alpha,
        }
    }

    fn unnormalized(&self, level: u32) -> f64 {
        let l = level as f64;
        let lg = libm::log2(l + 2.0);
        libm::exp2(-self.exponent() * l) * (l + 1.0) * lg * lg
    }
}

/// A positive PMF on `0..=max_level` with tail sums.
#[derive(Debug, Clone)]
pub struct LevelDistribution {
    kind: LevelDistributionKind,
    pmf: Vec<f64>,
    tails: Vec<f64>,
    sampler: Categorical,
}

impl LevelDistribution {
    pub fn new(kind: LevelDistributionKind, max_level: u32) -> Result<Self> {
        if let LevelDistributionKind::SigmaNonconstant { alpha } = kind {
            if !(alpha > 0.0 && alpha < 0.5) {
                return Err(Error::Config("alpha must lie in (0, 1/2)"));
            }
        }
        if max_level > 60 {
            return Err(Error::Config("level distribution support is limited to 60"));
        }
        let raw: Vec<f64> = (0..=max_level).map(|l| kind.unnormalized(l)).collect();
        let total: f64 = raw.iter().sum();
        let pmf: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mut tails = vec![0.0; pmf.len()];
        let mut acc = 0.0;
        for l in (0..pmf.len()).rev() {
            acc += pmf[l];
            tails[l] = acc;
        }
        tails[0] = 1.0;
        let sampler = Categorical::new(&pmf)?;
        Ok(LevelDistribution {
            kind,
            pmf,
            tails,
            sampler,
        })
    }

    pub fn kind(&self) -> LevelDistributionKind {
        self.kind
    }

    pub fn max_level(&self) -> u32 {
        (self.pmf.len() - 1) as u32
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn tails(&self) -> &[f64] {
        &self.tails
    }

    /// `P(level)`.
    pub fn prob(&self, level: u32) -> f64 {
        self.pmf.get(level as usize).copied().unwrap_or(0.0)
    }

    /// `Q(level) = Σ_{q ≥ level} P(q)`.
    pub fn tail(&self, level: u32) -> f64 {
        self.tails.get(level as usize).copied().unwrap_or(0.0)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.sampler.sample(rng) as u32
    }

    /// `Σ_l P(l) 2^l`, the mean work of one single-term draw per particle and unit time.
    pub fn single_term_work(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(l, p)| p * steps_per_unit(l as u32) as f64)
            .sum()
    }

    /// `Σ_l P(l) Σ_{q≤l} 2^q`, the same for one coupled-sum draw.
    pub fn coupled_sum_work(&self) -> f64 {
        let mut cumulative = 0.0;
        let mut total = 0.0;
        for (l, p) in self.pmf.iter().enumerate() {
            cumulative += steps_per_unit(l as u32) as f64;
            total += p * cumulative;
        }
        total
    }
}

/// Finest level and per-level particle counts for the multilevel filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelAllocation {
    pub max_level: u32,
    pub particles: Vec<usize>,
}

impl LevelAllocation {
    /// `Σ_l N_l 2^l`, the cost of one unit of time.
    pub fn cost_per_unit_time(&self) -> f64 {
        self.particles
            .iter()
            .enumerate()
            .map(|(l, n)| (n * steps_per_unit(l as u32)) as f64)
            .sum()
    }
}

/// Allocation targeting mean square error `O(ε²)` with unit constants.
///
/// `L = ⌈2 log2(1/ε)⌉`; for non-constant `σ`,
/// `N_l = ⌈ε⁻² Δ_L^{-1/4} Δ_l^{3/4}⌉`, and for constant `σ`,
/// `N_l = ⌈ε⁻² (L+1) Δ_l⌉`.
pub fn allocate_levels(epsilon: f64, sigma_constant: bool) -> Result<LevelAllocation> {
    allocate_levels_scaled(epsilon, sigma_constant, 1.0)
}

/// [`allocate_levels`] with every `N_l` multiplied by `scale` before rounding.
pub fn allocate_levels_scaled(epsilon: f64, sigma_constant: bool, scale: f64) -> Result<LevelAllocation> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config("epsilon must lie in (0, 1)"));
    }
    // the tolerance keeps ε = 2^{-L/2} from rounding up to L + 1
    let max_level = libm::ceil(2.0 * libm::log2(1.0 / epsilon) - 1e-9).max(0.0) as u32;
    allocation_for(max_level, 1.0 / (epsilon * epsilon), sigma_constant, scale)
}

/// Allocation for a given finest level with `ε² = Δ_L`.
pub fn allocate_for_level(max_level: u32, sigma_constant: bool, scale: f64) -> Result<LevelAllocation> {
    allocation_for(max_level, steps_per_unit(max_level) as f64, sigma_constant, scale)
}

fn allocation_for(max_level: u32, inv_eps_sq: f64, sigma_constant: bool, scale: f64) -> Result<LevelAllocation> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config("allocation scale must be positive"));
    }
    if max_level > 40 {
        return Err(Error::Config("allocation level is limited to 40"));
    }
    let big_l = max_level as f64;
    let particles = (0..=max_level)
        .map(|l| {
            let l = l as f64;
            let n = if sigma_constant {
                scale * inv_eps_sq * (big_l + 1.0) * libm::exp2(-l)
            } else {
                scale * inv_eps_sq * libm::exp2((big_l - 3.0 * l) / 4.0)
            };
            (libm::ceil(n) as usize).max(1)
        })
        .collect();
    Ok(LevelAllocation { max_level, particles })
}

/// MLPF estimates at one integer time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpfStep {
    pub time: usize,
    pub eta_phi: f64,
    pub gamma_phi: f64,
    pub gamma_one: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpfOutput {
    pub max_level: u32,
    pub steps: Vec<MlpfStep>,
    /// `t · Σ_l N_l 2^l`.
    pub cost: f64,
}

/// Multilevel particle filter with `particles[l]` particles at level `l`.
#[allow(clippy::too_many_arguments)]
pub fn mlpf_run<M: SdeModel + ?Sized>(
    model: &M,
    path: &ObservationPath,
    max_level: u32,
    particles: &[usize],
    t_max: usize,
    policy: ResamplingPolicy,
    phi: &TestFunction,
    seed: u64,
) -> Result<MlpfOutput> {
    if particles.len() != max_level as usize + 1 {
        return Err(Error::Shape {
            expected: max_level as usize + 1,
            found: particles.len(),
        });
    }
    if max_level > path.finest_level() {
        return Err(Error::Resolution {
            requested: max_level,
            finest: path.finest_level(),
        });
    }
    let base = pf_run(model, path, 0, particles[0], t_max, policy, phi, derive_seed(seed, 0))?;
    let mut steps: Vec<MlpfStep> = base
        .steps
        .iter()
        .map(|s| MlpfStep {
            time: s.time,
            eta_phi: s.eta_phi,
            gamma_phi: s.gamma_phi(),
            gamma_one: s.gamma_one(),
        })
        .collect();
    let mut cost = base.cost;
    for level in 1..=max_level {
        let n = particles[level as usize];
        let out = cpf_run(
            model,
            path,
            level,
            n,
            t_max,
            policy,
            phi,
            derive_seed(seed, level as u64),
        )?;
        for (acc, s) in steps.iter_mut().zip(&out.steps) {
            acc.eta_phi += s.eta_diff();
            acc.gamma_phi += s.gamma_phi_diff();
            acc.gamma_one += s.gamma_one_diff();
        }
        cost += out.cost;
    }
    Ok(MlpfOutput { max_level, steps, cost })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomizedKind {
    SingleTerm,
    CoupledSum,
}

impl RandomizedKind {
    pub fn name(self) -> &'static str {
        match self {
            RandomizedKind::SingleTerm => "st",
            RandomizedKind::CoupledSum => "cs",
        }
    }
}

/// One randomized estimate at one integer time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatePoint {
    pub time: usize,
    pub gamma_phi: f64,
    pub gamma_one: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasedEstimate {
    pub seed: u64,
    pub level_drawn: u32,
    /// Realized work: `t N 2^L` (single term) or `t N Σ_{q≤L} 2^q` (coupled sum).
    pub cost: f64,
    pub points: Vec<EstimatePoint>,
}

impl UnbiasedEstimate {
    pub fn at(&self, t: usize) -> Option<&EstimatePoint> {
        t.checked_sub(1).and_then(|i| self.points.get(i))
    }
}

/// Configuration of the single-term or coupled-sum estimator.
pub struct RandomizedEstimator<'a, M: SdeModel + ?Sized> {
    pub kind: RandomizedKind,
    pub model: &'a M,
    pub path: &'a ObservationPath,
    pub distribution: &'a LevelDistribution,
    pub particles: usize,
    pub t_max: usize,
    pub policy: ResamplingPolicy,
    pub phi: TestFunction,
}

impl<M: SdeModel + ?Sized> Clone for RandomizedEstimator<'_, M> {
    fn clone(&self) -> Self {
        RandomizedEstimator { ..*self }
    }
}

impl<M: SdeModel + ?Sized> RandomizedEstimator<'_, M> {
    pub fn validate(&self) -> Result<()> {
        if self.distribution.max_level() > self.path.finest_level() {
            return Err(Error::Resolution {
                requested: self.distribution.max_level(),
                finest: self.path.finest_level(),
            });
        }
        if self.particles == 0 {
            return Err(Error::Config("need at least one particle"));
        }
        if self.t_max == 0 || self.t_max > self.path.horizon() {
            return Err(Error::Horizon {
                requested: self.t_max,
                horizon: self.path.horizon(),
            });
        }
        self.policy.validate()
    }

    /// `(γ(φ), γ(1))` per time: level-0 filter estimate or coupled difference.
    fn psi(&self, level: u32, seed: u64) -> Result<Vec<(f64, f64)>> {
        let level_seed = derive_seed(seed, level as u64);
        let m = self.model;
        let (path, n, t, policy, phi) = (self.path, self.particles, self.t_max, self.policy, &self.phi);
        if level == 0 {
            let out = pf_run(m, path, 0, n, t, policy, phi, level_seed)?;
            Ok(out.steps.iter().map(|s| (s.gamma_phi(), s.gamma_one())).collect())
        } else {
            let out = cpf_run(m, path, level, n, t, policy, phi, level_seed)?;
            Ok(out
                .steps
                .iter()
                .map(|s| (s.gamma_phi_diff(), s.gamma_one_diff()))
                .collect())
        }
    }

    /// The level a draw with `seed` uses.
    pub fn draw_level(&self, seed: u64) -> u32 {
        self.distribution
            .sample(&mut sim_rng(derive_seed(seed, LEVEL_DRAW_TAG)))
    }

    /// One independent estimate.
    pub fn draw(&self, seed: u64) -> Result<UnbiasedEstimate> {
        self.validate()?;
        let level = self.draw_level(seed);
        self.draw_at_level(seed, level)
    }

    /// The estimate for `seed` with the level draw replaced by `level`.
    pub fn draw_at_level(&self, seed: u64, level: u32) -> Result<UnbiasedEstimate> {
        if level > self.distribution.max_level() {
            return Err(Error::Config("level outside the distribution support"));
        }
        let unit_cost = (self.t_max * self.particles) as f64;
        let (values, cost) = match self.kind {
            RandomizedKind::SingleTerm => {
                let p = self.distribution.prob(level);
                let values: Vec<(f64, f64)> = self
                    .psi(level, seed)?
                    .into_iter()
                    .map(|(a, b)| (a / p, b / p))
                    .collect();
                (values, unit_cost * steps_per_unit(level) as f64)
            }
            RandomizedKind::CoupledSum => {
                let mut values = self.psi(0, seed)?;
                let mut work = 1.0;
                for l in 1..=level {
                    let q = self.distribution.tail(l);
                    for (acc, (a, b)) in values.iter_mut().zip(self.psi(l, seed)?) {
                        acc.0 += a / q;
                        acc.1 += b / q;
                    }
                    work += steps_per_unit(l) as f64;
                }
                (values, unit_cost * work)
            }
        };
        Ok(UnbiasedEstimate {
            seed,
            level_drawn: level,
            cost,
            points: values
                .into_iter()
                .enumerate()
                .map(|(i, (gamma_phi, gamma_one))| EstimatePoint {
                    time: i + 1,
                    gamma_phi,
                    gamma_one,
                })
                .collect(),
        })
    }

    /// Expected cost of averaging `replicates` draws.
    pub fn expected_cost(&self, replicates: usize) -> f64 {
        let work = match self.kind {
            RandomizedKind::SingleTerm => self.distribution.single_term_work(),
            RandomizedKind::CoupledSum => self.distribution.coupled_sum_work(),
        };
        (self.t_max * replicates * self.particles) as f64 * work
    }
}

/// Single-term estimate with the given seed.
#[allow(clippy::too_many_arguments)]
pub fn st_estimate<M: SdeModel + ?Sized>(
    model: &M,
    path: &ObservationPath,
    distribution: &LevelDistribution,
    particles: usize,
    t_max: usize,
    policy: ResamplingPolicy,
    phi: TestFunction,
    seed: u64,
) -> Result<UnbiasedEstimate> {
    RandomizedEstimator {
        kind: RandomizedKind::SingleTerm,
        model,
        path,
        distribution,
        particles,
        t_max,
        policy,
        phi,
    }
    .draw(seed)
}

/// Coupled-sum estimate with the given seed.
#[allow(clippy::too_many_arguments)]
pub fn cs_estimate<M: SdeModel + ?Sized>(
    model: &M,
    path: &ObservationPath,
    distribution: &LevelDistribution,
    particles: usize,
    t_max: usize,
    policy: ResamplingPolicy,
    phi: TestFunction,
    seed: u64,
) -> Result<UnbiasedEstimate> {
    RandomizedEstimator {
        kind: RandomizedKind::CoupledSum,
        model,
        path,
        distribution,
        particles,
        t_max,
        policy,
        phi,
    }
    .draw(seed)
}

/// Sample mean and unbiased sample variance (`NaN` variance for one value).
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryPoint {
    pub time: usize,
    pub mean_phi: f64,
    pub variance_phi: f64,
    pub mean_one: f64,
    pub variance_one: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummary {
    pub base_seed: u64,
    pub points: Vec<SummaryPoint>,
    pub total_cost: f64,
    pub expected_cost: f64,
    pub estimates: Vec<UnbiasedEstimate>,
}

impl ReplicateSummary {
    /// Reduces estimates in the order given.
    pub fn from_estimates(base_seed: u64, estimates: Vec<UnbiasedEstimate>, expected_cost: f64) -> Self {
        let times = estimates.first().map_or(0, |e| e.points.len());
        let points = (0..times)
            .map(|i| {
                let phi: Vec<f64> = estimates.iter().map(|e| e.points[i].gamma_phi).collect();
                let one: Vec<f64> = estimates.iter().map(|e| e.points[i].gamma_one).collect();
                let (mean_phi, variance_phi) = mean_and_variance(&phi);
                let (mean_one, variance_one) = mean_and_variance(&one);
                SummaryPoint {
                    time: i + 1,
                    mean_phi,
                    variance_phi,
                    mean_one,
                    variance_one,
                }
            })
            .collect();
        ReplicateSummary {
            base_seed,
            points,
            total_cost: estimates.iter().map(|e| e.cost).sum(),
            expected_cost,
            estimates,
        }
    }

    pub fn replicates(&self) -> usize {
        self.estimates.len()
    }

    pub fn at(&self, t: usize) -> Option<&SummaryPoint> {
        t.checked_sub(1).and_then(|i| self.points.get(i))
    }
}

/// Seed of replicate `index` under `base_seed`.
pub fn replicate_seed(base_seed: u64, index: usize) -> u64 {
    derive_seed(base_seed, index as u64)
}

/// Averages `replicates` independent draws, sequentially in index order.
pub fn replicate_average<M: SdeModel + ?Sized>(
    estimator: &RandomizedEstimator<'_, M>,
    replicates: usize,
    base_seed: u64,
) -> Result<ReplicateSummary> {
    if replicates == 0 {
        return Err(Error::Config("need at least one replicate"));
    }
    estimator.validate()?;
    let estimates = (0..replicates)
        .map(|i| estimator.draw(replicate_seed(base_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateSummary::from_estimates(
        base_seed,
        estimates,
        estimator.expected_cost(replicates),
    ))
}

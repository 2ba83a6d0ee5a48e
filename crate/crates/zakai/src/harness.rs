//! Ground truth, cost/MSE sweeps and their CSV output.
//!
//! Mean square errors are measured against the configured ground truth (a
//! fine particle filter, or the exact oracle for the OU model), never against
//! the unknown continuous-time value.
//!
//! Runs and replicates are spread over a rayon pool; every run has its own
//! seed and results are reduced in index order, so the output does not depend
//! on the number of workers.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use zakai_core::estimators::{
    allocate_for_level, mean_and_variance, replicate_seed, LevelAllocation, ReplicateSummary,
};
use zakai_core::observations::steps_per_unit;
use zakai_core::oracle::{kalman_log_gamma, LinearGaussianSpec};
use zakai_core::rng::derive_seed;
use zakai_core::{
    mlpf_run, pf_run, BuiltinModel, LevelDistribution, LevelDistributionKind, ObservationPath, RandomizedEstimator,
    RandomizedKind, ResamplingPolicy, SdeModel, TestFunction,
};

use crate::config::{ExperimentConfig, GroundTruthConfig, MethodConfig, RandomizedConfig};
use crate::{io, with_workers, Error, Result};

/// Tag of the pilot draws that calibrate the ST/CS replicate counts.
pub const PILOT_TAG: u64 = u64::MAX - 1;

/// Averages `replicates` draws on the current rayon pool. Identical to
/// [`zakai_core::replicate_average`] for any pool size.
pub fn par_replicate_average<M: SdeModel + ?Sized>(
    estimator: &RandomizedEstimator<'_, M>,
    replicates: usize,
    base_seed: u64,
) -> Result<ReplicateSummary> {
    if replicates == 0 {
        return Err(Error::Config("need at least one replicate".into()));
    }
    estimator.validate()?;
    let estimates = (0..replicates)
        .into_par_iter()
        .map(|i| estimator.draw(replicate_seed(base_seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReplicateSummary::from_estimates(
        base_seed,
        estimates,
        estimator.expected_cost(replicates),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthSource {
    Oracle,
    ParticleFilter,
}

impl TruthSource {
    pub fn name(self) -> &'static str {
        match self {
            TruthSource::Oracle => "oracle",
            TruthSource::ParticleFilter => "pf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub value: f64,
    pub source: TruthSource,
    pub pf_value: f64,
    pub oracle_value: Option<f64>,
    /// Standard deviation of one ground-truth PF run, from independent repeats.
    pub pf_sd: Option<f64>,
    pub level: u32,
    pub particles: usize,
    pub seed: u64,
}

/// `γ_t(φ)` from one particle filter run with the ground-truth settings.
pub fn ground_truth_pf<M: SdeModel + ?Sized>(
    model: &M,
    path: &ObservationPath,
    phi: &TestFunction,
    t: usize,
    cfg: &GroundTruthConfig,
    policy: ResamplingPolicy,
    seed: u64,
) -> Result<f64> {
    if path.finest_level() < cfg.level {
        return Err(Error::Core(zakai_core::Error::Resolution {
            requested: cfg.level,
            finest: path.finest_level(),
        }));
    }
    let out = pf_run(model, path, cfg.level, cfg.particles, t, policy, phi, seed)?;
    Ok(out.steps[t - 1].gamma_phi())
}

fn oracle_value(
    model: BuiltinModel,
    path: &ObservationPath,
    phi: &TestFunction,
    t: usize,
    level: u32,
) -> Result<Option<f64>> {
    let spec = match LinearGaussianSpec::for_model(model, level) {
        Ok(spec) => spec,
        Err(zakai_core::Error::UnsupportedModel) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let v = kalman_log_gamma(&spec, path, t)?;
    Ok(match phi {
        TestFunction::One => Some(v.gamma_one()),
        TestFunction::Identity | TestFunction::Coordinate(0) => Some(v.gamma_identity()),
        _ => None,
    })
}

/// Ground truth for a builtin model. For OU the oracle value is used and the
/// PF value is required to lie within three standard deviations of it.
pub fn ground_truth(
    model: BuiltinModel,
    path: &ObservationPath,
    phi: &TestFunction,
    t: usize,
    cfg: &GroundTruthConfig,
    policy: ResamplingPolicy,
) -> Result<GroundTruth> {
    let pf_value = ground_truth_pf(&model, path, phi, t, cfg, policy, cfg.seed)?;
    let oracle = oracle_value(model, path, phi, t, cfg.level)?;
    let mut truth = GroundTruth {
        value: pf_value,
        source: TruthSource::ParticleFilter,
        pf_value,
        oracle_value: oracle,
        pf_sd: None,
        level: cfg.level,
        particles: cfg.particles,
        seed: cfg.seed,
    };
    if let Some(exact) = oracle {
        truth.value = exact;
        truth.source = TruthSource::Oracle;
        if cfg.cross_check_runs >= 2 {
            let repeats = (1..=cfg.cross_check_runs as u64)
                .into_par_iter()
                .map(|i| ground_truth_pf(&model, path, phi, t, cfg, policy, derive_seed(cfg.seed, i)))
                .collect::<Result<Vec<_>>>()?;
            let sd = mean_and_variance(&repeats).1.sqrt();
            truth.pf_sd = Some(sd);
            if (pf_value - exact).abs() > 3.0 * sd {
                return Err(Error::CrossCheck {
                    pf: pf_value,
                    oracle: exact,
                    tolerance: 3.0 * sd,
                });
            }
        }
    }
    Ok(truth)
}

/// Seed of run `run` of a method at sweep level `level`.
pub fn run_seed(base: u64, method_tag: u64, level: u32, run: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(base, method_tag), level as u64), run as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: &'static str,
    pub level: u32,
    pub run: usize,
    pub seed: u64,
    pub estimate: f64,
    pub squared_error: f64,
    pub cost: f64,
    pub expected_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub method: &'static str,
    pub level: u32,
    pub epsilon: f64,
    /// `N` for PF, `N_0;...;N_L` for MLPF, `M` for ST/CS.
    pub parameter: String,
    pub runs: usize,
    pub mse: f64,
    pub mse_se: f64,
    pub mean_cost: f64,
    pub expected_cost: f64,
    /// Pilot single-draw variance `c` for ST/CS.
    pub variance_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSlope {
    pub method: &'static str,
    /// Least-squares slope of `log MSE` against `log cost`.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub truth: GroundTruth,
    pub runs: Vec<RunRecord>,
    pub points: Vec<PointSummary>,
    pub slopes: Vec<MethodSlope>,
}

impl BenchmarkOutput {
    pub fn slope(&self, method: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.method == method).map(|s| s.slope)
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `ε = 2^{-L/2}`, so that `ε² = Δ_L`.
fn epsilon(level: u32) -> f64 {
    (-(level as f64) / 2.0).exp2()
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    model: BuiltinModel,
    path: &'a ObservationPath,
    phi: TestFunction,
    policy: ResamplingPolicy,
    truth: f64,
}

impl Context<'_> {
    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        method: &'static str,
        level: u32,
        run: usize,
        seed: u64,
        estimate: f64,
        cost: f64,
        expected_cost: f64,
    ) -> RunRecord {
        let e = estimate - self.truth;
        RunRecord {
            method,
            level,
            run,
            seed,
            estimate,
            squared_error: e * e,
            cost,
            expected_cost,
        }
    }

    fn runs<F>(&self, f: F) -> Result<Vec<RunRecord>>
    where
        F: Fn(usize) -> Result<RunRecord> + Sync + Send,
    {
        (0..self.cfg.runs).into_par_iter().map(f).collect()
    }

    fn pf_point(&self, tag: u64, level: u32, scale: f64) -> Result<(String, Vec<RunRecord>)> {
        let n = ((scale * steps_per_unit(level) as f64).ceil() as usize).max(1);
        let t = self.cfg.t;
        let cost = (t * n * steps_per_unit(level)) as f64;
        let runs = self.runs(|r| {
            let seed = run_seed(self.cfg.seed, tag, level, r);
            let out = pf_run(&self.model, self.path, level, n, t, self.policy, &self.phi, seed)?;
            Ok(self.record("pf", level, r, seed, out.steps[t - 1].gamma_phi(), cost, cost))
        })?;
        Ok((n.to_string(), runs))
    }

    fn mlpf_point(&self, tag: u64, level: u32, scale: f64) -> Result<(String, Vec<RunRecord>)> {
        let LevelAllocation { max_level, particles } = allocate_for_level(level, self.model.sigma_constant(), scale)?;
        let t = self.cfg.t;
        let runs = self.runs(|r| {
            let seed = run_seed(self.cfg.seed, tag, level, r);
            let out = mlpf_run(
                &self.model,
                self.path,
                max_level,
                &particles,
                t,
                self.policy,
                &self.phi,
                seed,
            )?;
            Ok(self.record("mlpf", level, r, seed, out.steps[t - 1].gamma_phi, out.cost, out.cost))
        })?;
        let parameter = particles.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";");
        Ok((parameter, runs))
    }

    fn randomized_estimator<'b>(
        &'b self,
        kind: RandomizedKind,
        dist: &'b LevelDistribution,
        r: &RandomizedConfig,
    ) -> Result<RandomizedEstimator<'b, BuiltinModel>> {
        Ok(RandomizedEstimator {
            kind,
            model: &self.model,
            path: self.path,
            distribution: dist,
            particles: self.cfg.randomized_particles(r)?,
            t_max: self.cfg.t,
            policy: self.policy,
            phi: self.phi,
        })
    }

    /// Single-draw variance of `γ_t(φ)` from the pilot draws.
    fn pilot_variance(&self, est: &RandomizedEstimator<'_, BuiltinModel>, tag: u64, replicates: usize) -> Result<f64> {
        let s = par_replicate_average(est, replicates, derive_seed(derive_seed(self.cfg.seed, tag), PILOT_TAG))?;
        Ok(s.points[self.cfg.t - 1].variance_phi)
    }

    fn randomized_point(
        &self,
        est: &RandomizedEstimator<'_, BuiltinModel>,
        name: &'static str,
        tag: u64,
        level: u32,
        replicates: usize,
    ) -> Result<(String, Vec<RunRecord>)> {
        let t = self.cfg.t;
        let expected = est.expected_cost(replicates);
        let runs = self.runs(|r| {
            let seed = run_seed(self.cfg.seed, tag, level, r);
            let estimates = (0..replicates)
                .map(|i| est.draw(replicate_seed(seed, i)))
                .collect::<Result<Vec<_>, _>>()?;
            let s = ReplicateSummary::from_estimates(seed, estimates, expected);
            Ok(self.record(name, level, r, seed, s.points[t - 1].mean_phi, s.total_cost, expected))
        })?;
        Ok((replicates.to_string(), runs))
    }
}

fn summarize(method: &'static str, level: u32, parameter: String, runs: &[RunRecord], c: Option<f64>) -> PointSummary {
    let errors: Vec<f64> = runs.iter().map(|r| r.squared_error).collect();
    let (mse, var) = mean_and_variance(&errors);
    let costs: Vec<f64> = runs.iter().map(|r| r.cost).collect();
    PointSummary {
        method,
        level,
        epsilon: epsilon(level),
        parameter,
        runs: runs.len(),
        mse,
        mse_se: (var / runs.len() as f64).sqrt(),
        mean_cost: mean_and_variance(&costs).0,
        expected_cost: runs[0].expected_cost,
        variance_constant: c,
    }
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<ObservationPath> {
    let path = match &cfg.data_file {
        Some(file) => io::load_path(file)?,
        None => ObservationPath::simulate(cfg.data_seed, cfg.t, cfg.data_level, 1)?,
    };
    if path.horizon() < cfg.t {
        return Err(Error::Core(zakai_core::Error::Horizon {
            requested: cfg.t,
            horizon: path.horizon(),
        }));
    }
    Ok(path)
}

/// Runs the configured sweep on `cfg.workers` threads.
pub fn benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let path = load_data(cfg)?;
    with_workers(cfg.workers, || benchmark_on(cfg, &path))?
}

fn benchmark_on(cfg: &ExperimentConfig, path: &ObservationPath) -> Result<BenchmarkOutput> {
    let model = cfg.builtin()?;
    let phi = cfg.test_function()?;
    let truth = ground_truth(model, path, &phi, cfg.t, &cfg.ground_truth, cfg.ground_truth_policy()?)?;
    let ctx = Context {
        cfg,
        model,
        path,
        phi,
        policy: cfg.resampling()?,
        truth: truth.value,
    };
    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    levels.dedup();

    let mut runs = Vec::new();
    let mut points = Vec::new();
    let mut slopes = Vec::new();
    for method in &cfg.methods {
        let tag = method.seed_tag();
        let name = method.name();
        let mut method_points = Vec::new();
        match method {
            MethodConfig::Pf { particle_scale } => {
                for &l in &levels {
                    let (param, r) = ctx.pf_point(tag, l, *particle_scale)?;
                    method_points.push(summarize(name, l, param, &r, None));
                    runs.extend(r);
                }
            }
            MethodConfig::Mlpf { allocation_scale } => {
                for &l in &levels {
                    let (param, r) = ctx.mlpf_point(tag, l, *allocation_scale)?;
                    method_points.push(summarize(name, l, param, &r, None));
                    runs.extend(r);
                }
            }
            MethodConfig::St(rc) | MethodConfig::Cs(rc) => {
                let kind = if matches!(method, MethodConfig::St(_)) {
                    RandomizedKind::SingleTerm
                } else {
                    RandomizedKind::CoupledSum
                };
                let dist = LevelDistribution::new(
                    LevelDistributionKind::for_model(model.sigma_constant(), rc.alpha),
                    rc.max_level,
                )?;
                let est = ctx.randomized_estimator(kind, &dist, rc)?;
                let c = ctx.pilot_variance(&est, tag, rc.pilot_replicates)?;
                for &l in &levels {
                    let m = ((rc.replicate_scale * c * steps_per_unit(l) as f64).ceil() as usize).max(1);
                    let (param, r) = ctx.randomized_point(&est, name, tag, l, m)?;
                    method_points.push(summarize(name, l, param, &r, Some(c)));
                    runs.extend(r);
                }
            }
        }
        if method_points.len() >= 2 {
            let x: Vec<f64> = method_points.iter().map(|p| p.mean_cost.ln()).collect();
            let y: Vec<f64> = method_points.iter().map(|p| p.mse.ln()).collect();
            slopes.push(MethodSlope {
                method: name,
                slope: fit_slope(&x, &y),
            });
        }
        points.extend(method_points);
    }
    Ok(BenchmarkOutput {
        truth,
        runs,
        points,
        slopes,
    })
}

pub fn write_results<W: Write>(cfg: &ExperimentConfig, out: &BenchmarkOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "method",
        "level",
        "run",
        "base_seed",
        "data_seed",
        "truth_seed",
        "run_seed",
        "estimate",
        "truth",
        "squared_error",
        "cost",
        "expected_cost",
    ])?;
    for r in &out.runs {
        w.write_record([
            r.method.to_string(),
            r.level.to_string(),
            r.run.to_string(),
            cfg.seed.to_string(),
            cfg.data_seed.to_string(),
            out.truth.seed.to_string(),
            r.seed.to_string(),
            r.estimate.to_string(),
            out.truth.value.to_string(),
            r.squared_error.to_string(),
            r.cost.to_string(),
            r.expected_cost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(cfg: &ExperimentConfig, out: &BenchmarkOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "method",
        "level",
        "epsilon",
        "parameter",
        "runs",
        "mse",
        "mse_se",
        "mean_cost",
        "expected_cost",
        "log_mse",
        "log_cost",
        "variance_constant",
        "fitted_slope",
        "truth",
        "truth_source",
        "base_seed",
        "data_seed",
        "truth_seed",
    ])?;
    for p in &out.points {
        w.write_record([
            p.method.to_string(),
            p.level.to_string(),
            p.epsilon.to_string(),
            p.parameter.clone(),
            p.runs.to_string(),
            p.mse.to_string(),
            p.mse_se.to_string(),
            p.mean_cost.to_string(),
            p.expected_cost.to_string(),
            p.mse.ln().to_string(),
            p.mean_cost.ln().to_string(),
            p.variance_constant.map(|c| c.to_string()).unwrap_or_default(),
            out.slope(p.method).map(|s| s.to_string()).unwrap_or_default(),
            out.truth.value.to_string(),
            out.truth.source.name().to_string(),
            cfg.seed.to_string(),
            cfg.data_seed.to_string(),
            out.truth.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the sweep and writes `results.csv` and `summary.csv` into the
/// configured output directory. Returns the two paths.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<(BenchmarkOutput, PathBuf, PathBuf)> {
    let out = benchmark(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|source| Error::File {
        path: cfg.output_dir.clone(),
        source,
    })?;
    let results = cfg.output_dir.join("results.csv");
    let summary = cfg.output_dir.join("summary.csv");
    write_results(cfg, &out, io::create(&results)?)?;
    write_summary(cfg, &out, io::create(&summary)?)?;
    Ok((out, results, summary))
}

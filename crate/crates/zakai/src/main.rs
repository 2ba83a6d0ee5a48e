use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use zakai::config::ExperimentConfig;
use zakai::core::estimators::{
    allocate_for_level, allocate_levels_scaled, LevelAllocation, DEFAULT_ALPHA, DEFAULT_MAX_LEVEL,
};
use zakai::core::oracle::{kalman_log_gamma, LinearGaussianSpec};
use zakai::core::{
    builtin_model, cpf_run, mlpf_run, pf_run, BuiltinModel, LevelDistribution, LevelDistributionKind, ObservationPath,
    RandomizedEstimator, RandomizedKind, ResamplingPolicy, SdeModel, TestFunction,
};
use zakai::harness::{par_replicate_average, run_benchmark};
use zakai::{io, with_workers};

/// Unbiased particle estimators of the unnormalized filter.
#[derive(Parser)]
#[command(name = "zakai", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an observation path and write it as CSV.
    SimulateData {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        level: u32,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Particle filter at one level.
    RunPf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        particles: usize,
    },
    /// Coupled particle filter at levels `level` and `level - 1`.
    RunCpf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        particles: usize,
    },
    /// Multilevel particle filter.
    RunMlpf {
        #[command(flatten)]
        common: Common,
        /// Finest level; with the standard allocation unless `--particles` is given.
        #[arg(long, conflicts_with = "epsilon")]
        max_level: Option<u32>,
        /// Target root mean square error for the standard allocation.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Comma separated `N_0,...,N_L`.
        #[arg(long, value_delimiter = ',', requires = "max_level")]
        particles: Option<Vec<usize>>,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Single-term randomized estimator averaged over replicates.
    RunSt(Randomized),
    /// Coupled-sum randomized estimator averaged over replicates.
    RunCs(Randomized),
    /// Exact discretized values for the OU model.
    Oracle {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value = "ou")]
        model: String,
    },
    /// Cost/MSE sweep; writes results.csv and summary.csv.
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Observation path CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: String,
    #[arg(long)]
    t: usize,
    #[arg(long, default_value = "ess:0.25")]
    policy: String,
    #[arg(long, default_value = "identity")]
    phi: String,
    #[arg(long)]
    seed: u64,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Randomized {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = DEFAULT_MAX_LEVEL)]
    max_level: u32,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Particles per filter (100 for constant σ, 200 otherwise).
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    replicates: usize,
    #[arg(long)]
    workers: Option<usize>,
    /// Per-replicate rows are written here.
    #[arg(long)]
    draws: Option<PathBuf>,
}

struct Loaded {
    path: ObservationPath,
    model: BuiltinModel,
    policy: ResamplingPolicy,
    phi: TestFunction,
}

impl Common {
    fn load(&self) -> Result<Loaded> {
        Ok(Loaded {
            path: io::load_path(&self.data)?,
            model: builtin_model(&self.model)?,
            policy: self.policy.parse()?,
            phi: self.phi.parse()?,
        })
    }

    fn output(&self, write: impl FnOnce(&mut dyn Write) -> zakai::Result<()>) -> Result<()> {
        emit(self.out.as_deref(), write)
    }
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> zakai::Result<()>) -> Result<()> {
    match out {
        Some(file) => {
            let mut w = io::create(file)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn run_randomized(kind: RandomizedKind, args: &Randomized) -> Result<()> {
    let c = &args.common;
    let l = c.load()?;
    let dist = LevelDistribution::new(
        LevelDistributionKind::for_model(l.model.sigma_constant(), args.alpha),
        args.max_level,
    )?;
    let particles = args
        .particles
        .unwrap_or(zakai::core::estimators::default_particles(l.model.sigma_constant()));
    let est = RandomizedEstimator {
        kind,
        model: &l.model,
        path: &l.path,
        distribution: &dist,
        particles,
        t_max: c.t,
        policy: l.policy,
        phi: l.phi,
    };
    let summary = with_workers(args.workers, || par_replicate_average(&est, args.replicates, c.seed))??;
    c.output(|w| io::write_summary(&summary, w))?;
    if let Some(file) = &args.draws {
        emit(Some(file), |w| io::write_draws(&summary, w))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SimulateData {
            seed,
            horizon,
            level,
            dim,
            out,
        } => {
            let path = ObservationPath::simulate(seed, horizon, level, dim)?;
            io::save_path(&path, &out)?;
        }
        Command::RunPf {
            common,
            level,
            particles,
        } => {
            let l = common.load()?;
            let out = pf_run(
                &l.model,
                &l.path,
                level,
                particles,
                common.t,
                l.policy,
                &l.phi,
                common.seed,
            )?;
            common.output(|w| io::write_filter(&out, w))?;
        }
        Command::RunCpf {
            common,
            level,
            particles,
        } => {
            let l = common.load()?;
            let out = cpf_run(
                &l.model,
                &l.path,
                level,
                particles,
                common.t,
                l.policy,
                &l.phi,
                common.seed,
            )?;
            common.output(|w| io::write_coupled(&out, w))?;
        }
        Command::RunMlpf {
            common,
            max_level,
            epsilon,
            particles,
            scale,
        } => {
            let l = common.load()?;
            let sigma_constant = l.model.sigma_constant();
            let LevelAllocation { max_level, particles } = match (max_level, epsilon, particles) {
                (Some(max_level), None, Some(particles)) => LevelAllocation { max_level, particles },
                (Some(level), None, None) => allocate_for_level(level, sigma_constant, scale)?,
                (None, Some(eps), None) => allocate_levels_scaled(eps, sigma_constant, scale)?,
                _ => bail!("give either --epsilon or --max-level"),
            };
            let out = mlpf_run(
                &l.model,
                &l.path,
                max_level,
                &particles,
                common.t,
                l.policy,
                &l.phi,
                common.seed,
            )?;
            common.output(|w| io::write_mlpf(&out, w))?;
        }
        Command::RunSt(args) => run_randomized(RandomizedKind::SingleTerm, &args)?,
        Command::RunCs(args) => run_randomized(RandomizedKind::CoupledSum, &args)?,
        Command::Oracle { data, level, t, model } => {
            let path = io::load_path(&data)?;
            let spec = LinearGaussianSpec::for_model(builtin_model(&model)?, level)?;
            let v = kalman_log_gamma(&spec, &path, t)?;
            println!("log_gamma_one,posterior_mean,gamma_identity");
            println!("{},{},{}", v.log_gamma_one, v.posterior_mean, v.gamma_identity());
        }
        Command::Benchmark {
            config,
            workers,
            t,
            runs,
            seed,
            out_dir,
        } => {
            let mut cfg = match &config {
                Some(file) => ExperimentConfig::load(file)?,
                None => ExperimentConfig::default(),
            };
            cfg.workers = workers.or(cfg.workers);
            cfg.t = t.unwrap_or(cfg.t);
            cfg.runs = runs.unwrap_or(cfg.runs);
            cfg.seed = seed.unwrap_or(cfg.seed);
            if let Some(dir) = out_dir {
                cfg.output_dir = dir;
            }
            let (out, results, summary) = run_benchmark(&cfg).context("benchmark failed")?;
            eprintln!(
                "ground truth {} ({}); wrote {} and {}",
                out.truth.value,
                out.truth.source.name(),
                results.display(),
                summary.display()
            );
            for s in &out.slopes {
                eprintln!("{}: log MSE / log cost slope {:.3}", s.method, s.slope);
            }
        }
    }
    Ok(())
}

/// 3 when a filter degenerated anywhere in the error chain, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    let degenerate = e.chain().any(|c| {
        c.downcast_ref::<zakai::Error>()
            .is_some_and(zakai::Error::is_degenerate)
            || matches!(
                c.downcast_ref::<zakai::core::Error>(),
                Some(zakai::core::Error::Degenerate { .. })
            )
    });
    if degenerate {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degeneracy_maps_to_exit_code_three() {
        let direct = anyhow::Error::from(zakai::core::Error::Degenerate { time: 2 });
        assert_eq!(exit_code(&direct), 3);
        let wrapped = anyhow::Error::from(zakai::Error::Core(zakai::core::Error::Degenerate { time: 1 }))
            .context("benchmark failed");
        assert_eq!(exit_code(&wrapped), 3);
        let other = anyhow::Error::from(zakai::Error::Config("bad".into()));
        assert_eq!(exit_code(&other), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

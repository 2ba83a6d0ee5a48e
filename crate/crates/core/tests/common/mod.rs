#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use zakai_core::observations::{log_weight_g, step_size};
use zakai_core::oracle::{kalman_log_gamma, LinearGaussianSpec};
use zakai_core::resampling::MaximalCoupling;
use zakai_core::rng::sim_rng;
use zakai_core::{coupled_euler_block, BuiltinModel, ObservationPath, SdeModel};

/// Fixed data used by the unbiasedness tests.
pub const DATA_SEED: u64 = 7;
pub const DATA_LEVEL: u32 = 8;
pub const DATA_HORIZON: usize = 10;

pub fn fixed_data() -> ObservationPath {
    ObservationPath::simulate(DATA_SEED, DATA_HORIZON, DATA_LEVEL, 1).unwrap()
}

pub fn oracle_gamma_one(level: u32, t: usize) -> f64 {
    kalman_log_gamma(&LinearGaussianSpec::for_ou(level), &fixed_data(), t)
        .unwrap()
        .gamma_one()
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// Asymptotic Kolmogorov survival function `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// Two-sample KS statistic and p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    (d, ks_p(d, na * nb / (na + nb)))
}

/// One-sample KS test against `N(mean, sd²)`.
pub fn ks_normal(xs: &[f64], mean: f64, sd: f64) -> (f64, f64) {
    let law = Normal::new(mean, sd).unwrap();
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = law.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    (d, ks_p(d, n))
}

/// Pearson goodness-of-fit p-value; cells with zero probability must be empty.
pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        if p == 0.0 {
            assert_eq!(c, 0, "draw from a zero-probability cell");
            continue;
        }
        let e = p * total as f64;
        stat += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    if cells < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

/// Gauss–Hermite rule for `E[f(Z)]`, `Z ~ N(0, 1)`: nodes and weights.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let s2 = std::f64::consts::SQRT_2;
    let spi = std::f64::consts::PI.sqrt();
    (x.iter().map(|v| v * s2).collect(), w.iter().map(|v| v / spi).collect())
}

type Rule = (Vec<f64>, Vec<f64>);
type Chain<'a> = (
    &'a ObservationPath,
    u32,
    usize,
    f64,
    f64,
    &'a dyn Fn(f64) -> f64,
    &'a Rule,
);

/// `E[∏_k G_k(x_k) · ψ(x_n)]` over the Euler chain by nested Gauss–Hermite.
fn nested_quadrature(
    path: &ObservationPath,
    level: u32,
    steps: usize,
    terminal: &dyn Fn(f64) -> f64,
    nodes: &Rule,
) -> f64 {
    let delta = step_size(level);
    let a = 1.0 - delta;
    let sq = 0.5 * delta.sqrt();
    fn go(k: usize, x: f64, ctx: &Chain) -> f64 {
        let (path, level, steps, a, sq, terminal, (z, w)) = *ctx;
        if k == steps {
            return terminal(x);
        }
        let g = log_weight_g(&BuiltinModel::OrnsteinUhlenbeck, path, level, k, &[x])
            .unwrap()
            .exp();
        let inner: f64 = z
            .iter()
            .zip(w)
            .map(|(zi, wi)| wi * go(k + 1, a * x + sq * zi, ctx))
            .sum();
        g * inner
    }
    go(0, 0.0, &(path, level, steps, a, sq, terminal, nodes))
}

/// Doubles the rule size until two successive values agree to 1e-13 relative.
pub fn adaptive_quadrature(path: &ObservationPath, level: u32, steps: usize, terminal: &dyn Fn(f64) -> f64) -> f64 {
    let mut n = 10;
    let mut prev = nested_quadrature(path, level, steps, terminal, &gauss_hermite(n));
    loop {
        n *= 2;
        let next = nested_quadrature(path, level, steps, terminal, &gauss_hermite(n));
        if (next - prev).abs() <= 1e-13 * next.abs() || n >= 80 {
            return next;
        }
        prev = next;
    }
}

/// `E|X_1^l - X_1^{l-1}|²` for GBM started at 1.
pub fn gbm_coupling_error(level: u32, pairs: usize, seed: u64) -> f64 {
    let model = BuiltinModel::GeometricBrownian;
    let mut rng = sim_rng(seed);
    let x = model.initial_state();
    (0..pairs)
        .map(|_| {
            let (f, c) = coupled_euler_block(&model, level, 0, x, x, &mut rng).unwrap();
            let d = f.terminal()[0] - c.terminal()[0];
            d * d
        })
        .sum::<f64>()
        / pairs as f64
}

/// Empirical joint counts of `draws` coupled index pairs.
pub fn coupling_counts(r1: &[f64], r2: &[f64], draws: usize, seed: u64) -> Vec<Vec<u64>> {
    let mc = MaximalCoupling::new(r1, r2).unwrap();
    let mut rng = sim_rng(seed);
    let mut counts = vec![vec![0u64; r2.len()]; r1.len()];
    for _ in 0..draws {
        let (i, j) = mc.sample(&mut rng);
        counts[i][j] += 1;
    }
    counts
}

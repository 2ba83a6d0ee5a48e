mod common;

use common::{adaptive_quadrature, gauss_hermite};
use zakai_core::observations::steps_per_unit;
use zakai_core::oracle::{kalman_log_gamma, LinearGaussianSpec};
use zakai_core::ObservationPath;

#[test]
fn gauss_hermite_integrates_moments() {
    let (z, w) = gauss_hermite(20);
    let moment = |p: i32| z.iter().zip(&w).map(|(x, wi)| wi * x.powi(p)).sum::<f64>();
    assert!((moment(0) - 1.0).abs() < 1e-14);
    assert!(moment(1).abs() < 1e-14);
    assert!((moment(2) - 1.0).abs() < 1e-13);
    assert!((moment(4) - 3.0).abs() < 1e-12);
    assert!((moment(6) - 15.0).abs() < 1e-11);
}

#[test]
fn kalman_matches_quadrature_on_short_horizons() {
    for seed in [7, 19, 2024] {
        let path = ObservationPath::simulate(seed, 2, 4, 1).unwrap();
        for level in 0..=1 {
            for t in 1..=2 {
                let steps = t * steps_per_unit(level);
                let kalman = kalman_log_gamma(&LinearGaussianSpec::for_ou(level), &path, t).unwrap();
                let one = adaptive_quadrature(&path, level, steps, &|_| 1.0);
                let id = adaptive_quadrature(&path, level, steps, &|x| x);
                let rel = (kalman.gamma_one() - one).abs() / one.abs();
                assert!(
                    rel < 1e-8,
                    "seed {seed} l {level} t {t}: {} vs {one}",
                    kalman.gamma_one()
                );
                // γ(id) can vanish exactly, so it is measured on the scale of γ(1)
                let rel_id = (kalman.gamma_identity() - id).abs() / id.abs().max(one.abs());
                assert!(
                    rel_id < 1e-8,
                    "seed {seed} l {level} t {t}: {} vs {id}",
                    kalman.gamma_identity()
                );
            }
        }
    }
}

#[test]
fn one_step_with_random_start_matches_one_dimensional_integral() {
    // x_0 ~ N(m, p0): γ = E[exp(x Δy - x²/2)] at level 0
    let path = ObservationPath::simulate(5, 1, 0, 1).unwrap();
    let dy = path.fine_increments()[0];
    let mut spec = LinearGaussianSpec::new(-3.0, 0.25, 1.0, 1.0, 0.4, 0).unwrap();
    spec.p0 = 0.7;
    let kalman = kalman_log_gamma(&spec, &path, 1).unwrap().gamma_one();
    let (z, w) = gauss_hermite(60);
    let direct: f64 = z
        .iter()
        .zip(&w)
        .map(|(zi, wi)| {
            let x = 0.4 + 0.7f64.sqrt() * zi;
            wi * (x * dy - 0.5 * x * x).exp()
        })
        .sum();
    assert!((kalman - direct).abs() < 1e-10 * direct, "{kalman} vs {direct}");
}

#[test]
fn level_differences_decay_at_least_like_root_delta() {
    // mean over data paths of |γ^{l+1}(1) - γ^l(1)|; single paths cross zero
    let seeds = 40u64;
    let mut mean_abs = vec![0.0; 10];
    for seed in 0..seeds {
        let path = ObservationPath::simulate(seed, 5, 10, 1).unwrap();
        let gamma: Vec<f64> = (0..=10)
            .map(|l| {
                kalman_log_gamma(&LinearGaussianSpec::for_ou(l), &path, 5)
                    .unwrap()
                    .gamma_one()
            })
            .collect();
        for (acc, w) in mean_abs.iter_mut().zip(gamma.windows(2)) {
            *acc += (w[1] - w[0]).abs() / seeds as f64;
        }
    }
    let xs: Vec<f64> = (2..10).map(|l| l as f64).collect();
    let ys: Vec<f64> = mean_abs[2..].iter().map(|d| d.log2()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    assert!(slope <= -0.5, "slope {slope}, mean |diff| {mean_abs:?}");
    println!("level difference slope {slope}");
}

use zakai::config::{ExperimentConfig, GroundTruthConfig, MethodConfig};
use zakai::core::{BuiltinModel, CustomModel, ObservationPath, ResamplingPolicy, TestFunction};
use zakai::harness::{benchmark, ground_truth, ground_truth_pf, TruthSource};

fn small_truth() -> GroundTruthConfig {
    GroundTruthConfig {
        level: 5,
        particles: 2000,
        seed: 3,
        policy: "ess:0.25".into(),
        cross_check_runs: 10,
    }
}

#[test]
fn ou_ground_truth_uses_oracle_after_cross_check() {
    let path = ObservationPath::simulate(7, 3, 5, 1).unwrap();
    let g = ground_truth(
        BuiltinModel::OrnsteinUhlenbeck,
        &path,
        &TestFunction::One,
        3,
        &small_truth(),
        ResamplingPolicy::default(),
    )
    .unwrap();
    assert_eq!(g.source, TruthSource::Oracle);
    let sd = g.pf_sd.unwrap();
    assert!(sd > 0.0);
    assert!((g.pf_value - g.value).abs() <= 3.0 * sd);
    assert_eq!(Some(g.value), g.oracle_value);
}

#[test]
fn nonlinear_ground_truth_is_the_particle_filter() {
    let path = ObservationPath::simulate(7, 2, 5, 1).unwrap();
    let cfg = small_truth();
    let g = ground_truth(
        BuiltinModel::NonlinearDiffusion,
        &path,
        &TestFunction::Identity,
        2,
        &cfg,
        ResamplingPolicy::default(),
    )
    .unwrap();
    assert_eq!(g.source, TruthSource::ParticleFilter);
    assert_eq!(g.oracle_value, None);
    assert_eq!(g.value, g.pf_value);
}

#[test]
fn zero_sensor_gives_unit_normalizing_constant() {
    let model = CustomModel::new(
        1,
        1,
        vec![0.0],
        |x, out| out[0] = -x[0],
        |_, out| out[0] = 1.0,
        |_, out| out[0] = 0.0,
    )
    .unwrap()
    .with_sigma_constant(true);
    let path = ObservationPath::simulate(1, 3, 5, 1).unwrap();
    let v = ground_truth_pf(
        &model,
        &path,
        &TestFunction::One,
        3,
        &small_truth(),
        ResamplingPolicy::default(),
        5,
    )
    .unwrap();
    assert!((v - 1.0).abs() < 1e-12, "{v}");
}

fn tiny(model: &str) -> ExperimentConfig {
    ExperimentConfig {
        model: model.into(),
        data_level: 5,
        t: 2,
        runs: 12,
        levels: vec![1, 2, 3],
        ground_truth: GroundTruthConfig {
            level: 5,
            particles: 3000,
            cross_check_runs: 0,
            ..Default::default()
        },
        methods: vec![
            MethodConfig::Pf { particle_scale: 2.0 },
            MethodConfig::Mlpf { allocation_scale: 2.0 },
        ],
        ..Default::default()
    }
}

#[test]
fn benchmark_is_deterministic_and_costs_are_exact() {
    let a = benchmark(&tiny("ou")).unwrap();
    let mut cfg = tiny("ou");
    cfg.workers = Some(2);
    let b = benchmark(&cfg).unwrap();
    assert_eq!(a.runs, b.runs);
    assert_eq!(a.points, b.points);
    for p in &a.points {
        assert_eq!(p.mean_cost, p.expected_cost, "{} at level {}", p.method, p.level);
    }
    let pf_costs: Vec<f64> = a
        .points
        .iter()
        .filter(|p| p.method == "pf")
        .map(|p| p.mean_cost)
        .collect();
    // N = ⌈2·2^L⌉ particles over t = 2 units of 2^L steps
    assert_eq!(pf_costs, vec![2.0 * 4.0 * 2.0, 2.0 * 8.0 * 4.0, 2.0 * 16.0 * 8.0]);
}

#[test]
fn particle_filter_mse_falls_with_level() {
    let mut cfg = tiny("ou");
    cfg.runs = 60;
    cfg.methods = vec![MethodConfig::Pf { particle_scale: 4.0 }];
    cfg.levels = vec![1, 3, 5];
    let out = benchmark(&cfg).unwrap();
    let mse: Vec<f64> = out.points.iter().map(|p| p.mse).collect();
    assert!(mse[0] > mse[1] && mse[1] > mse[2], "{mse:?}");
    assert!(out.slope("pf").unwrap() < 0.0);
}

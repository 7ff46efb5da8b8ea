use bintrack::controller::Dither;
use bintrack::estimator::{
    innovation, recursive_update, EpochMode, EstimatorConfig, EstimatorState, InformationMatrix,
};
use bintrack::lti::{binary_sensor, PlantModel, Polynomial};
use bintrack::noise::{beta_gain, radius, NoiseModel, RadiusSchedule};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normal() -> NoiseModel {
    NoiseModel::gaussian(1.0, 0.0).unwrap()
}

fn section_v_plant() -> PlantModel {
    PlantModel::new(
        Polynomial::new(vec![1.0, -0.1, 0.5]).unwrap(),
        Polynomial::new(vec![1.0, 0.5, -0.4]).unwrap(),
    )
    .unwrap()
}

/// Drives the estimator with Rademacher inputs on the benchmark plant and
/// hands every post-step state to `check`.
fn dithered_run(steps: usize, seed: u64, mode: EpochMode, mut check: impl FnMut(&EstimatorState)) {
    let cfg = EstimatorConfig {
        epoch_mode: mode,
        ..EstimatorConfig::default()
    };
    let noise = normal();
    let mut est = EstimatorState::new(cfg, noise.clone()).unwrap();
    let mut plant = section_v_plant();
    let mut dither = Dither::from_seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    for k in 0..steps {
        let u = dither.next_value();
        let y = plant.step(u);
        let s = binary_sensor(y, noise.sample(&mut rng), 0.0);
        est.step(k, u, 0.0, s).unwrap();
        check(&est);
    }
}

#[test]
fn step_invariants_hold_along_a_dithered_run() {
    let mut probe_rng = ChaCha8Rng::seed_from_u64(5);
    dithered_run(1500, 3, EpochMode::Replay, |est| {
        let d = est.last_diagnostics().unwrap();
        assert!(d.innovation.abs() < 1.0);
        assert!(est.theta().lp_norm(1) <= d.radius);
        let v = DVector::from_fn(est.dimension(), |_, _| probe_rng.random_range(-1.0..1.0));
        let back = est.gain_matrix() * (est.information() * &v);
        assert!((back - &v).norm() <= 1e-8 * v.norm());
    });
}

#[test]
fn replay_at_unchanged_dimension_is_bit_identical() {
    let mut checked = 0;
    dithered_run(400, 8, EpochMode::Replay, |est| {
        if est.time() % 97 == 0 {
            let mut again = est.clone();
            again.epoch_replay(est.dimension()).unwrap();
            assert_eq!(again.theta(), est.theta());
            assert_eq!(again.gain_matrix(), est.gain_matrix());
            assert_eq!(again.information(), est.information());
            checked += 1;
        }
    });
    assert_eq!(checked, 4);
}

#[test]
fn replay_costs_one_update_per_logged_step() {
    dithered_run(300, 1, EpochMode::Replay, |est| {
        if est.time() == 250 {
            let mut again = est.clone();
            let before = again.updates_applied();
            again.epoch_replay(est.dimension() + 3).unwrap();
            assert_eq!(again.updates_applied() - before, 250);
            assert_eq!(again.dimension(), est.dimension() + 3);
        }
    });
}

#[test]
fn replay_rejects_shrinking() {
    let mut est = EstimatorState::new(EstimatorConfig::default(), normal()).unwrap();
    for k in 0..30 {
        est.step(k, 1.0, 0.0, k % 2 == 0).unwrap();
    }
    assert!(est.epoch_replay(est.dimension() - 1).is_err());
}

#[test]
fn zeropad_and_replay_agree_while_dimension_is_fixed() {
    // before the first dimension increase the two modes run the same recursion
    let mut a = Vec::new();
    let mut b = Vec::new();
    dithered_run(3, 2, EpochMode::Replay, |e| a.push(e.theta().clone()));
    dithered_run(3, 2, EpochMode::Zeropad, |e| b.push(e.theta().clone()));
    assert_eq!(a, b);
    let mut last = (DVector::zeros(1), DVector::zeros(1));
    dithered_run(200, 2, EpochMode::Replay, |e| last.0 = e.theta().clone());
    dithered_run(200, 2, EpochMode::Zeropad, |e| last.1 = e.theta().clone());
    assert_eq!(last.0.len(), last.1.len());
    assert_ne!(last.0, last.1);
}

/// With every regressor lag at or beyond `p_old` equal to zero, the larger
/// recursion is block diagonal and must reproduce the smaller one.
#[test]
fn replay_with_vanishing_tail_lags_matches_small_run() {
    let (p_old, p_new, steps) = (6, 9, 20);
    let noise = normal();
    let sched = RadiusSchedule::new(0.125).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    // nonzero inputs only where no lag >= p_old can reach them
    let inputs: Vec<f64> = (0..steps)
        .map(|k| if k + p_old >= steps { rng.random_range(-1.5..1.5) } else { 0.0 })
        .collect();
    let script: Vec<(f64, bool)> = (0..steps)
        .map(|_| (rng.random_range(-0.5..0.5), rng.random_bool(0.5)))
        .collect();

    let run = |p: usize| {
        let mut theta = DVector::zeros(p);
        let mut gain = DMatrix::identity(p, p);
        let mut info = DMatrix::identity(p, p);
        let mut u_max: f64 = 0.0;
        for k in 0..steps {
            u_max = u_max.max(inputs[k].abs());
            let d = radius(&noise, &sched, k);
            let beta = beta_gain(&noise, d, u_max);
            let phi = DVector::from_fn(p, |j, _| if j <= k { inputs[k - j] } else { 0.0 });
            let (c, s) = script[k];
            recursive_update(&mut theta, &mut gain, &mut info, &phi, beta, c, s, d, &noise).unwrap();
        }
        theta
    };
    let small = run(p_old);
    let large = run(p_new);
    assert!(small.norm() > 0.0);
    for j in 0..p_old {
        assert!((small[j] - large[j]).abs() < 1e-12, "coordinate {j}");
    }
    for j in p_old..p_new {
        assert_eq!(large[j], 0.0);
    }
}

#[test]
fn innovation_is_centred_at_the_true_parameter() {
    let noise = normal();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let y: f64 = rng.random_range(-1.0..1.0);
        let c: f64 = rng.random_range(-0.5..0.5);
        let s = binary_sensor(y, noise.sample(&mut rng), c);
        let e = innovation(s, c, y, &noise);
        sum += e;
        sq += e * e;
    }
    let mean = sum / n as f64;
    let sd = (sq / n as f64 - mean * mean).sqrt();
    assert!(mean.abs() < 3.0 * sd / (n as f64).sqrt(), "mean {mean}, sd {sd}");
}

#[test]
fn information_lambda_min_grows_linearly_under_dither() {
    let mut info = InformationMatrix::new(4, 1.0);
    let mut dither = Dither::from_seed(31);
    let inputs: Vec<f64> = (0..=2000).map(|_| dither.next_value()).collect();
    for u in &inputs {
        info.push(*u);
    }
    // independent eigen oracle on explicitly summed outer products
    let mut m = DMatrix::<f64>::identity(4, 4);
    for k in 0..inputs.len() {
        let phi = DVector::from_fn(4, |j, _| if j <= k { inputs[k - j] } else { 0.0 });
        m += &phi * phi.transpose();
    }
    let oracle = SymmetricEigen::new(m).eigenvalues.min();
    assert!((info.lambda_min() - oracle).abs() < 1e-8 * oracle);
    assert!(oracle >= 0.5 * 2000.0);
    assert!(info.lambda_min_at_least(0.99 * oracle));
    assert!(!info.lambda_min_at_least(1.01 * oracle));
}

#[test]
fn state_lambda_min_matches_scalar_example() {
    let mut est = EstimatorState::new(EstimatorConfig::default(), normal()).unwrap();
    est.step(0, 1.0, 0.0, true).unwrap();
    est.step(1, 2.0, 0.0, false).unwrap();
    assert!((est.info_matrix_lambda_min(1).unwrap() - 6.0).abs() < 1e-12);
    assert!(est.info_matrix_lambda_min(2).is_err());
}

#[test]
fn estimator_state_is_send() {
    fn assert_send<T: Send>() {}
    assert_send::<EstimatorState>();
}

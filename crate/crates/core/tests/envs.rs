use std::f64::consts::PI;

use simba_core::envs::*;
use simba_core::rng::rng_from_seed;

#[test]
fn reset_is_seeded_and_on_the_circle() {
    let (s1, o1) = pendulum_reset(42);
    let (s2, o2) = pendulum_reset(42);
    assert_eq!((s1, o1.clone()), (s2, o2));
    assert!((o1[0] * o1[0] + o1[1] * o1[1] - 1.0).abs() < 1e-12);
    assert!(s1.theta > -PI && s1.theta <= PI);
    assert!(s1.theta_dot.abs() <= 1.0);
}

#[test]
fn reset_angle_is_uniform() {
    let n = 10_000;
    let mut thetas: Vec<f64> = (0..n).map(|i| pendulum_reset(i as u64).0.theta).collect();
    thetas.sort_by(f64::total_cmp);
    let d = thetas
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let cdf = (t + PI) / (2.0 * PI);
            (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
        })
        .fold(0.0, f64::max);
    // Kolmogorov critical value at the 1% level
    assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
}

#[test]
fn reward_examples() {
    let up = PendulumState { theta: 0.0, theta_dot: 0.0 };
    assert_eq!(pendulum_step(up, 0.0).1.reward, 0.0);
    let down = PendulumState { theta: PI, theta_dot: 0.0 };
    assert!((pendulum_step(down, 0.0).1.reward + PI * PI).abs() < 1e-12);
}

#[test]
fn one_step_from_horizontal() {
    let (next, step) = pendulum_step(PendulumState { theta: PI / 2.0, theta_dot: 0.0 }, 0.0);
    assert!((next.theta_dot - 0.75).abs() < 1e-12);
    assert!((next.theta - (PI / 2.0 + 0.75 * 0.05)).abs() < 1e-12);
    assert!(!step.done);
}

#[test]
fn torque_and_speed_are_clipped() {
    let s = PendulumState { theta: 0.0, theta_dot: 7.9 };
    let (a, _) = pendulum_step(s, 50.0);
    let (b, _) = pendulum_step(s, 2.0);
    assert_eq!(a, b);
    assert_eq!(a.theta_dot, 8.0);
}

#[test]
fn wrap_angle_range() {
    assert_eq!(wrap_angle(PI), PI);
    assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
    assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    assert!((wrap_angle(0.25 + 8.0 * PI) - 0.25).abs() < 1e-9);
}

#[test]
fn dynamics_are_deterministic_and_rewards_bounded() {
    let mut rng = rng_from_seed(5);
    use rand::Rng as _;
    let lo = -(PI * PI + 0.1 * 64.0 + 0.001 * 4.0);
    for _ in 0..10_000 {
        let s = PendulumState {
            theta: rng.random_range(-10.0..10.0),
            theta_dot: rng.random_range(-8.0..=8.0),
        };
        let u = rng.random_range(-5.0..5.0);
        let (a, sa) = pendulum_step(s, u);
        let (b, sb) = pendulum_step(s, u);
        assert_eq!(a.theta.to_bits(), b.theta.to_bits());
        assert_eq!(sa, sb);
        assert!(sa.reward <= 0.0 && sa.reward >= lo);
        assert!(a.theta_dot.abs() <= 8.0);
    }
}

#[test]
fn episodes_never_terminate_early() {
    let mut env = Pendulum::new(1);
    env.reset();
    for _ in 0..500 {
        assert!(!env.step(&[1.0]).unwrap().done);
    }
    assert_eq!(env.max_episode_steps(), 200);
    assert!(env.step(&[1.0, 2.0]).is_err());
}

#[test]
fn wrapper_identity_and_dims() {
    let spec = WrapperSpec::identity();
    let mut rng = rng_from_seed(0);
    assert_eq!(spec.wrap(&[1.0, 2.0, 3.0], &mut rng), vec![1.0, 2.0, 3.0]);

    let spec = WrapperSpec::sample(64, 9);
    assert!(spec.distractor_scales.iter().all(|s| (1e-2..=1e2).contains(s)));
    let env = DistractorWrapper::new(Pendulum::new(0), spec, 1).unwrap();
    assert_eq!(env.obs_dim(), 67);
}

#[test]
fn wrapper_keeps_true_observation() {
    let spec = WrapperSpec::sample(8, 2);
    let mut plain = Pendulum::new(7);
    let mut wrapped = DistractorWrapper::new(Pendulum::new(7), spec, 3).unwrap();
    assert_eq!(plain.reset(), wrapped.reset()[..3].to_vec());
    for _ in 0..50 {
        let a = plain.step(&[0.3]).unwrap();
        let b = wrapped.step(&[0.3]).unwrap();
        assert_eq!(a.obs, b.obs[..3].to_vec());
        assert_eq!(a.reward, b.reward);
    }
}

#[test]
fn true_dim_scales_multiply() {
    let spec = WrapperSpec {
        distractor_dims: 0,
        distractor_scales: vec![],
        true_dim_scales: Some(vec![2.0, 3.0, 4.0]),
    };
    assert_eq!(spec.wrap(&[1.0, 1.0, 1.0], &mut rng_from_seed(0)), vec![2.0, 3.0, 4.0]);
    let bad = WrapperSpec {
        true_dim_scales: Some(vec![1.0]),
        ..spec
    };
    assert!(DistractorWrapper::new(Pendulum::new(0), bad, 0).is_err());
}

#[test]
fn distractor_std_matches_scale() {
    let spec = WrapperSpec::sample(16, 4);
    let mut rng = rng_from_seed(8);
    let n = 10_000;
    let samples: Vec<Vec<f64>> = (0..n).map(|_| spec.wrap(&[0.0, 0.0, 0.0], &mut rng)).collect();
    for (i, scale) in spec.distractor_scales.iter().enumerate() {
        let col: Vec<f64> = samples.iter().map(|s| s[3 + i]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let std = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((std / scale - 1.0).abs() < 0.05, "dim {i}: std {std} vs scale {scale}");
    }
}

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use twin_teleop::filter::{filter_stream, kf_step, KalmanConfig, KalmanState};
use twin_teleop::Vec3;

/// Iterates the covariance recursion alone with a plain matrix update.
fn riccati_fixed_point(cfg: &KalmanConfig, steps: usize) -> [[f64; 2]; 2] {
    let dt = cfg.dt_s;
    let f = [[1.0, dt], [0.0, 1.0]];
    let q = [
        [cfg.q * dt.powi(4) / 4.0, cfg.q * dt.powi(3) / 2.0],
        [cfg.q * dt.powi(3) / 2.0, cfg.q * dt * dt],
    ];
    let mul = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        c
    };
    let tr = |a: [[f64; 2]; 2]| [[a[0][0], a[1][0]], [a[0][1], a[1][1]]];
    let mut p = [[cfg.r, 0.0], [0.0, 1e6]];
    for _ in 0..steps {
        let mut m = mul(mul(f, p), tr(f));
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += q[i][j];
            }
        }
        let s = m[0][0] + cfg.r;
        let k = [m[0][0] / s, m[1][0] / s];
        // P = M - K H M
        p = [
            [m[0][0] - k[0] * m[0][0], m[0][1] - k[0] * m[0][1]],
            [m[1][0] - k[1] * m[0][0], m[1][1] - k[1] * m[0][1]],
        ];
    }
    p
}

#[test]
fn steady_state_covariance_matches_riccati_iteration() {
    let cfg = KalmanConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut s = KalmanState::new();
    for _ in 0..10_000 {
        let z = Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        s = kf_step(&s, &z, &cfg).unwrap();
    }
    let want = riccati_fixed_point(&cfg, 10_000);
    for axis in s.axes().unwrap() {
        for i in 0..2 {
            for j in 0..2 {
                let scale = want[i][j].abs().max(1e-12);
                assert!(
                    (axis.cov[i][j] - want[i][j]).abs() <= 1e-8 * scale.max(1.0),
                    "cov[{i}][{j}] = {} vs {}",
                    axis.cov[i][j],
                    want[i][j]
                );
            }
        }
    }
}

#[test]
fn zero_stream_stays_zero() {
    let out = filter_stream(&vec![Vec3::zeros(); 50], &KalmanConfig::default()).unwrap();
    assert!(out.iter().all(|p| *p == Vec3::zeros()));
}

#[test]
fn ramp_error_drops_below_measurement_error() {
    let cfg = KalmanConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.2).unwrap();
    let truth: Vec<Vec3> = (0..900).map(|k| Vec3::new(0.05 * k as f64, -0.02 * k as f64, 1.0)).collect();
    let meas: Vec<Vec3> = truth
        .iter()
        .map(|p| p + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)))
        .collect();
    let out = filter_stream(&meas, &cfg).unwrap();
    let rms = |xs: &[Vec3]| (xs.iter().zip(&truth).map(|(a, b)| (a - b).norm_squared()).sum::<f64>() / xs.len() as f64).sqrt();
    assert!(rms(&out) < rms(&meas), "{} vs {}", rms(&out), rms(&meas));
}

#[test]
fn smoothing_reduces_variance_of_constant_input() {
    let cfg = KalmanConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let meas: Vec<Vec3> = (0..2000).map(|_| Vec3::new(noise.sample(&mut rng), 0.0, 0.0)).collect();
    let out = filter_stream(&meas, &cfg).unwrap();
    let var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
    };
    let raw: Vec<f64> = meas[100..].iter().map(|p| p.x).collect();
    let filt: Vec<f64> = out[100..].iter().map(|p| p.x).collect();
    assert!(var(&filt) <= var(&raw));
}

proptest! {
    #[test]
    fn covariance_stays_psd(
        zs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64), 1..200),
        q in 1e-2..1e4f64,
        r in 0.0..1.0f64,
    ) {
        let cfg = KalmanConfig { q, r, ..KalmanConfig::default() };
        let mut s = KalmanState::new();
        for (x, y, z) in zs {
            s = kf_step(&s, &Vec3::new(x, y, z), &cfg).unwrap();
            for a in s.axes().unwrap() {
                let [[p00, p01], [p10, p11]] = a.cov;
                prop_assert!((p01 - p10).abs() <= 1e-9 * (1.0 + p01.abs()));
                let tr = p00 + p11;
                let det = p00 * p11 - p01 * p10;
                let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
                let lo = tr / 2.0 - disc;
                prop_assert!(lo >= -1e-12 * (1.0 + tr.abs()), "min eigenvalue {lo}");
            }
        }
    }

    #[test]
    fn filtering_is_deterministic(zs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), 1..60)) {
        let meas: Vec<Vec3> = zs.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect();
        let a = filter_stream(&meas, &KalmanConfig::default()).unwrap();
        let b = filter_stream(&meas, &KalmanConfig::default()).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(p, q)| p.iter().zip(q.iter()).all(|(u, v)| u.to_bits() == v.to_bits())));
    }
}

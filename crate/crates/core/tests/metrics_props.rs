use proptest::prelude::*;

use twin_teleop::frames::RigidTransform;
use twin_teleop::metrics::{anchor_distance, collision_metrics, fps_stats, path_length, Hand, MetricsError, MetricsReport, TrajectorySample};
use twin_teleop::Vec3;

fn sample(t_us: u64, hand: Hand, p: Vec3, contact: bool, punct: u32) -> TrajectorySample {
    TrajectorySample {
        t_us,
        hand,
        p,
        force: Vec3::zeros(),
        clearance: if contact { 0.0 } else { 2.0 },
        in_contact: contact,
        punctures_cum: punct,
        seq: 0,
        frame_ms: 11.1,
    }
}

fn walk() -> impl Strategy<Value = Vec<TrajectorySample>> {
    prop::collection::vec(((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), any::<bool>(), any::<bool>(), 0u32..2), 2..80).prop_map(|steps| {
        let mut p = [Vec3::zeros(), Vec3::new(50.0, 0.0, 0.0)];
        let mut punct = [0u32; 2];
        let mut out = Vec::new();
        for (k, ((x, y, z), left, contact, dp)) in steps.into_iter().enumerate() {
            let h = left as usize;
            p[h] += Vec3::new(x, y, z);
            punct[h] += dp;
            let hand = if left { Hand::Left } else { Hand::Right };
            out.push(sample(11_111 * k as u64, hand, p[h], contact, punct[h]));
        }
        out
    })
}

#[test]
fn stationary_run_has_no_hazards() {
    let xs: Vec<_> = (0..20).map(|k| sample(11_111 * k, Hand::Right, Vec3::new(1.0, 2.0, 3.0), false, 0)).collect();
    let r = MetricsReport::compute("still", Some(1), &xs, None).unwrap();
    assert_eq!((r.path_length_mm, r.tau_coll_s, r.n_puncture, r.rho_sub_mm), (0.0, 0.0, 0, 0.0));
}

#[test]
fn fps_low_example_and_empty() {
    let mut frames = vec![10.0; 99];
    frames.push(50.0);
    let (_, low) = fps_stats(&frames).unwrap();
    assert!((low - 20.0).abs() < 1e-12);
    assert_eq!(fps_stats(&[]), Err(MetricsError::EmptyLog));
    assert_eq!(path_length(&[]), Err(MetricsError::EmptyLog));
}

proptest! {
    #[test]
    fn path_length_is_rigid_invariant(xs in walk(), axis in (-1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64), th in 0.0..6.28f64, t in (-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64)) {
        let r = RigidTransform::from_axis_angle(Vec3::new(axis.0, axis.1, axis.2), th);
        let r = RigidTransform::new(*r.rotation(), Vec3::new(t.0, t.1, t.2)).unwrap();
        let moved: Vec<_> = xs.iter().map(|s| TrajectorySample { p: r.transform_point(&s.p), ..*s }).collect();
        prop_assert!((path_length(&xs).unwrap() - path_length(&moved).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn path_length_matches_summation(xs in walk()) {
        let mut want = 0.0;
        for h in [Hand::Left, Hand::Right] {
            let ps: Vec<Vec3> = xs.iter().filter(|s| s.hand == h).map(|s| s.p).collect();
            for i in 1..ps.len() {
                want += ((ps[i].x - ps[i - 1].x).powi(2) + (ps[i].y - ps[i - 1].y).powi(2) + (ps[i].z - ps[i - 1].z).powi(2)).sqrt();
            }
        }
        prop_assert!((path_length(&xs).unwrap() - want).abs() <= 1e-9);
    }

    #[test]
    fn collision_time_and_punctures_are_sane(xs in walk()) {
        let (tau, _) = collision_metrics(&xs).unwrap();
        let span = (xs.last().unwrap().t_us - xs[0].t_us) as f64 / 1e6;
        prop_assert!(tau <= span + 1e-12);
        let mut prev = 0;
        for n in 1..=xs.len() {
            let (_, p) = collision_metrics(&xs[..n]).unwrap();
            prop_assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn anchor_min_below_mean(xs in walk(), a in (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64)) {
        let s = anchor_distance(&xs, &Vec3::new(a.0, a.1, a.2)).unwrap();
        prop_assert!(s.d_min <= s.d_mean + 1e-12);
    }

    #[test]
    fn report_is_deterministic(xs in walk()) {
        let apex = Vec3::new(1.0, 1.0, 1.0);
        let a = MetricsReport::compute("w", Some(3), &xs, Some(&apex)).unwrap();
        let b = MetricsReport::compute("w", Some(3), &xs, Some(&apex)).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

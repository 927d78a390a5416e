#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use twin_teleop::harness::ScenarioConfig;

/// Flat membrane half-space at z = 0 and one right-hand trajectory.
pub fn flat_scenario(duration_s: f64, seed: u64, waypoints: &[(f64, [f64; 3])], channel: Value) -> ScenarioConfig {
    let wps: Vec<Value> = waypoints.iter().map(|(t, p)| json!({"t_s": t, "p_mm": p})).collect();
    let v = json!({
        "name": "flat",
        "duration_s": duration_s,
        "seed": seed,
        "scene": {"objects": [
            {"type": "half_space", "point": [0, 0, 0], "normal": [0, 0, 1], "material": "membrane",
             "layers": [{"thickness_mm": 1.0, "material": "membrane"}, {"thickness_mm": 1.0, "material": "parenchyma"}]}
        ]},
        "net": {"channel": channel},
        "trajectories": [{"hand": "Right", "waypoints": wps}]
    });
    ScenarioConfig::from_json(&v.to_string()).expect("valid test scenario")
}

pub fn nominal_channel() -> Value {
    json!({"delay_ms": 2.0, "jitter_ms": 1.0})
}

/// Random short scenario: two hands over a sphere and a vessel capsule,
/// pressing to random depths over a lossy, jittery channel.
pub fn fuzzed_scenario(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hand = |name: &str, rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(4..9);
        let mut t = 0.0;
        let mut wps = Vec::new();
        for i in 0..n {
            let x = rng.gen_range(-30.0..30.0);
            let y = rng.gen_range(-30.0..30.0);
            let z = if i == 0 { 15.0 } else { rng.gen_range(-6.0..8.0) };
            wps.push(json!({"t_s": t, "p_mm": [x, y, z]}));
            t += rng.gen_range(0.15..0.5);
        }
        json!({"hand": name, "noise_mm": rng.gen_range(0.0..0.1), "waypoints": wps})
    };
    let left = hand("Left", &mut rng);
    let right = hand("Right", &mut rng);
    let v = json!({
        "name": "fuzz",
        "duration_s": rng.gen_range(1.0..2.5),
        "seed": seed,
        "scene": {"objects": [
            {"type": "sphere", "center": [0, 0, -40], "radius": 40, "material": "parenchyma",
             "layers": [{"thickness_mm": rng.gen_range(0.5..2.0), "material": "membrane"}]},
            {"type": "capsule", "a": [-20, 10, 0], "b": [20, 10, 0], "radius": 1.5, "material": "vessel_wall"}
        ]},
        "net": {"channel": {
            "loss_prob": rng.gen_range(0.0..0.2),
            "delay_ms": rng.gen_range(0.0..5.0),
            "jitter_ms": rng.gen_range(0.0..8.0),
            "reorder": rng.gen_bool(0.5)
        }},
        "trajectories": [left, right]
    });
    ScenarioConfig::from_json(&v.to_string()).expect("valid fuzzed scenario")
}

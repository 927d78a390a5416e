//! Trajectory outcome metrics computed from run-log samples.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::Vec3;

/// Proximity band for the sub-millimeter ratio, mm.
pub const PROXIMITY_BAND_MM: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("log contains no samples")]
    EmptyLog,
    #[error("missing samples for condition `{0}`")]
    MissingCondition(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn code(&self) -> &'static str {
        match self {
            Hand::Left => "L",
            Hand::Right => "R",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "L" => Some(Hand::Left),
            "R" => Some(Hand::Right),
            _ => None,
        }
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One logged follower sample at a render frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    /// Simulation time, µs.
    pub t_us: u64,
    pub hand: Hand,
    /// Follower tip, workspace frame, mm.
    pub p: Vec3,
    /// Rendered force, N.
    pub force: Vec3,
    pub clearance: f64,
    pub in_contact: bool,
    pub punctures_cum: u32,
    /// Last applied command sequence number.
    pub seq: u32,
    /// Render frame time, ms.
    pub frame_ms: f64,
}

impl TrajectorySample {
    pub fn t_s(&self) -> f64 {
        self.t_us as f64 / 1e6
    }
}

fn per_hand(samples: &[TrajectorySample]) -> Vec<(Hand, Vec<&TrajectorySample>)> {
    let hands: BTreeSet<Hand> = samples.iter().map(|s| s.hand).collect();
    hands
        .into_iter()
        .map(|h| (h, samples.iter().filter(|s| s.hand == h).collect()))
        .collect()
}

/// Sum of consecutive displacement norms, per hand.
pub fn path_length_by_hand(samples: &[TrajectorySample]) -> Result<Vec<(Hand, f64)>, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    Ok(per_hand(samples)
        .into_iter()
        .map(|(h, xs)| (h, xs.windows(2).map(|w| (w[1].p - w[0].p).norm()).sum()))
        .collect())
}

/// Total path length over all hands, mm.
pub fn path_length(samples: &[TrajectorySample]) -> Result<f64, MetricsError> {
    Ok(path_length_by_hand(samples)?.iter().map(|(_, l)| l).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Kinematics {
    pub duration_s: f64,
    pub v_mean: f64,
    pub v_max: f64,
    /// Population standard deviation of frame speeds.
    pub speed_sd: f64,
}

/// Duration and frame-speed statistics. Speeds come from finite
/// differences over actual timestamps, pooled across hands.
pub fn kinematics(samples: &[TrajectorySample]) -> Result<Kinematics, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let t0 = samples.iter().map(|s| s.t_us).min().expect("non-empty");
    let t1 = samples.iter().map(|s| s.t_us).max().expect("non-empty");
    let mut speeds = Vec::new();
    for (_, xs) in per_hand(samples) {
        for w in xs.windows(2) {
            let dt = w[1].t_s() - w[0].t_s();
            if dt > 0.0 {
                speeds.push((w[1].p - w[0].p).norm() / dt);
            }
        }
    }
    let duration_s = (t1 - t0) as f64 / 1e6;
    if speeds.is_empty() {
        return Ok(Kinematics {
            duration_s,
            ..Default::default()
        });
    }
    let n = speeds.len() as f64;
    let mean = speeds.iter().sum::<f64>() / n;
    let var = speeds.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(Kinematics {
        duration_s,
        v_mean: mean,
        v_max: speeds.iter().copied().fold(0.0, f64::max),
        speed_sd: var.sqrt(),
    })
}

/// Collision time and puncture count.
///
/// A contact sample owns the interval up to its hand's next sample; the
/// collision time is the length of the union of those intervals across
/// hands, so it never exceeds the log duration.
pub fn collision_metrics(samples: &[TrajectorySample]) -> Result<(f64, u32), MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let mut intervals: Vec<(u64, u64)> = Vec::new();
    let mut punctures = 0;
    for (_, xs) in per_hand(samples) {
        for w in xs.windows(2) {
            if w[0].in_contact && w[1].t_us > w[0].t_us {
                intervals.push((w[0].t_us, w[1].t_us));
            }
        }
        punctures += xs.iter().map(|s| s.punctures_cum).max().unwrap_or(0);
    }
    intervals.sort_unstable();
    let mut total_us = 0u64;
    let mut current: Option<(u64, u64)> = None;
    for (a, b) in intervals {
        match current {
            Some((ca, cb)) if a <= cb => current = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total_us += cb - ca;
                current = Some((a, b));
            }
            None => current = Some((a, b)),
        }
    }
    if let Some((a, b)) = current {
        total_us += b - a;
    }
    Ok((total_us as f64 / 1e6, punctures))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClearanceStats {
    pub min_d_left: Option<f64>,
    pub min_d_right: Option<f64>,
    /// Fraction of samples with `0 < clearance < 1 mm`.
    pub rho_sub_mm: f64,
}

pub fn clearance_metrics(samples: &[TrajectorySample]) -> Result<ClearanceStats, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let min_of = |h: Hand| {
        samples
            .iter()
            .filter(|s| s.hand == h)
            .map(|s| s.clearance)
            .reduce(f64::min)
    };
    let near = samples
        .iter()
        .filter(|s| s.clearance > 0.0 && s.clearance < PROXIMITY_BAND_MM)
        .count();
    Ok(ClearanceStats {
        min_d_left: min_of(Hand::Left),
        min_d_right: min_of(Hand::Right),
        rho_sub_mm: near as f64 / samples.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorStats {
    pub d_min: f64,
    pub d_mean: f64,
}

/// Distance statistics of the samples to an anchor point.
pub fn anchor_distance(samples: &[TrajectorySample], apex: &Vec3) -> Result<AnchorStats, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let d: Vec<f64> = samples.iter().map(|s| (s.p - apex).norm()).collect();
    Ok(AnchorStats {
        d_min: d.iter().copied().fold(f64::INFINITY, f64::min),
        d_mean: d.iter().sum::<f64>() / d.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorComparison {
    pub baseline: AnchorStats,
    pub treatment: AnchorStats,
    /// Mean distance gain, baseline minus treatment, mm.
    pub delta_d: f64,
}

/// Anchor accuracy for a baseline/treatment pair of support-hand samples.
pub fn anchor_accuracy(
    baseline: &[TrajectorySample],
    treatment: &[TrajectorySample],
    apex: &Vec3,
) -> Result<AnchorComparison, MetricsError> {
    let b = anchor_distance(baseline, apex).map_err(|_| MetricsError::MissingCondition("baseline"))?;
    let t = anchor_distance(treatment, apex).map_err(|_| MetricsError::MissingCondition("treatment"))?;
    Ok(AnchorComparison {
        baseline: b,
        treatment: t,
        delta_d: b.d_mean - t.d_mean,
    })
}

/// Average frame rate and the "1% low" rate (mean of the slowest 1% of
/// frames, at least one frame).
pub fn fps_stats(frame_ms: &[f64]) -> Result<(f64, f64), MetricsError> {
    if frame_ms.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let mean = frame_ms.iter().sum::<f64>() / frame_ms.len() as f64;
    let mut sorted = frame_ms.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let worst = ((frame_ms.len() as f64) * 0.01).ceil().max(1.0) as usize;
    let worst_mean = sorted[..worst].iter().sum::<f64>() / worst as f64;
    Ok((1000.0 / mean, 1000.0 / worst_mean))
}

/// Frame times, one per distinct timestamp in log order.
pub fn frame_stream(samples: &[TrajectorySample]) -> Vec<f64> {
    let mut seen = BTreeSet::new();
    samples
        .iter()
        .filter(|s| seen.insert(s.t_us))
        .map(|s| s.frame_ms)
        .collect()
}

/// Every outcome for one run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: Option<u64>,
    pub samples: usize,
    pub path_length_mm: f64,
    pub path_length_left_mm: Option<f64>,
    pub path_length_right_mm: Option<f64>,
    pub duration_s: f64,
    pub v_mean: f64,
    pub v_max: f64,
    pub speed_sd: f64,
    pub tau_coll_s: f64,
    pub n_puncture: u32,
    pub min_d_left: Option<f64>,
    pub min_d_right: Option<f64>,
    pub rho_sub_mm: f64,
    pub fps_avg: f64,
    pub fps_p1: f64,
    /// Anchor distances, present when an apex was supplied.
    pub d_min: Option<f64>,
    pub d_mean: Option<f64>,
    pub anchor_left: Option<AnchorStats>,
    pub anchor_right: Option<AnchorStats>,
}

impl MetricsReport {
    pub fn compute(
        scenario: &str,
        seed: Option<u64>,
        samples: &[TrajectorySample],
        apex: Option<&Vec3>,
    ) -> Result<Self, MetricsError> {
        let by_hand = path_length_by_hand(samples)?;
        let hand_len = |h: Hand| by_hand.iter().find(|(x, _)| *x == h).map(|(_, l)| *l);
        let kin = kinematics(samples)?;
        let (tau_coll_s, n_puncture) = collision_metrics(samples)?;
        let clr = clearance_metrics(samples)?;
        let (fps_avg, fps_p1) = fps_stats(&frame_stream(samples))?;

        let mut report = Self {
            scenario: scenario.to_owned(),
            seed,
            samples: samples.len(),
            path_length_mm: by_hand.iter().map(|(_, l)| l).sum(),
            path_length_left_mm: hand_len(Hand::Left),
            path_length_right_mm: hand_len(Hand::Right),
            duration_s: kin.duration_s,
            v_mean: kin.v_mean,
            v_max: kin.v_max,
            speed_sd: kin.speed_sd,
            tau_coll_s,
            n_puncture,
            min_d_left: clr.min_d_left,
            min_d_right: clr.min_d_right,
            rho_sub_mm: clr.rho_sub_mm,
            fps_avg,
            fps_p1,
            d_min: None,
            d_mean: None,
            anchor_left: None,
            anchor_right: None,
        };
        if let Some(apex) = apex {
            let all = anchor_distance(samples, apex)?;
            report.d_min = Some(all.d_min);
            report.d_mean = Some(all.d_mean);
            let of = |h: Hand| {
                let xs: Vec<_> = samples.iter().filter(|s| s.hand == h).copied().collect();
                anchor_distance(&xs, apex).ok()
            };
            report.anchor_left = of(Hand::Left);
            report.anchor_right = of(Hand::Right);
        }
        Ok(report)
    }

    /// Named scalar outcomes used by condition comparisons. Absent values
    /// are skipped.
    pub fn scalar_metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("duration_s", self.duration_s),
            ("path_length_mm", self.path_length_mm),
            ("v_mean", self.v_mean),
            ("speed_sd", self.speed_sd),
            ("v_max", self.v_max),
            ("tau_coll_s", self.tau_coll_s),
            ("n_puncture", self.n_puncture as f64),
            ("rho_sub_mm", self.rho_sub_mm),
            ("fps_avg", self.fps_avg),
            ("fps_p1", self.fps_p1),
        ];
        let opt = [
            ("min_d_left", self.min_d_left),
            ("min_d_right", self.min_d_right),
            ("d_min", self.d_min),
            ("d_mean", self.d_mean),
            ("anchor_left_mean", self.anchor_left.map(|a| a.d_mean)),
            ("anchor_right_mean", self.anchor_right.map(|a| a.d_mean)),
        ];
        out.extend(opt.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
        out
    }

    /// `key=value` lines; absent values print as `na`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario={}", self.scenario);
        let _ = writeln!(s, "seed={}", self.seed.map_or("na".to_owned(), |v| v.to_string()));
        let _ = writeln!(s, "samples={}", self.samples);
        let opt = |v: Option<f64>| v.map_or("na".to_owned(), |v| format!("{v:.6}"));
        let rows = [
            ("path_length_mm", format!("{:.6}", self.path_length_mm)),
            ("path_length_left_mm", opt(self.path_length_left_mm)),
            ("path_length_right_mm", opt(self.path_length_right_mm)),
            ("duration_s", format!("{:.6}", self.duration_s)),
            ("v_mean_mm_s", format!("{:.6}", self.v_mean)),
            ("v_max_mm_s", format!("{:.6}", self.v_max)),
            ("speed_sd_mm_s", format!("{:.6}", self.speed_sd)),
            ("tau_coll_s", format!("{:.6}", self.tau_coll_s)),
            ("n_puncture", self.n_puncture.to_string()),
            ("min_d_left_mm", opt(self.min_d_left)),
            ("min_d_right_mm", opt(self.min_d_right)),
            ("rho_sub_mm", format!("{:.6}", self.rho_sub_mm)),
            ("fps_avg", format!("{:.3}", self.fps_avg)),
            ("fps_p1", format!("{:.3}", self.fps_p1)),
            ("d_min_mm", opt(self.d_min)),
            ("d_mean_mm", opt(self.d_mean)),
            ("anchor_left_mean_mm", opt(self.anchor_left.map(|a| a.d_mean))),
            ("anchor_right_mean_mm", opt(self.anchor_right.map(|a| a.d_mean))),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

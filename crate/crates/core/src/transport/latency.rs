//! One-way command latency statistics against the frame budget.

use std::fmt::Write as _;

use super::TransportError;

/// A single 90 Hz frame, ms.
pub const FRAME_BUDGET_MS: f64 = 11.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySample {
    pub seq: u32,
    pub send_us: u64,
    pub apply_us: u64,
}

impl LatencySample {
    pub fn latency_ms(&self) -> f64 {
        self.apply_us.saturating_sub(self.send_us) as f64 / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub count: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    pub budget_ms: f64,
    /// `(seq, latency_ms)` for every sample over budget.
    pub violations: Vec<(u32, f64)>,
}

impl LatencyReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "count={}", self.count);
        let _ = writeln!(s, "mean_ms={:.3}", self.mean_ms);
        let _ = writeln!(s, "p95_ms={:.3}", self.p95_ms);
        let _ = writeln!(s, "max_ms={:.3}", self.max_ms);
        let _ = writeln!(s, "budget_ms={:.3}", self.budget_ms);
        let _ = writeln!(s, "violations={}", self.violations.len());
        for (seq, l) in self.violations.iter().take(20) {
            let _ = writeln!(s, "violation seq={seq} latency_ms={l:.3}");
        }
        let _ = writeln!(s, "verdict={}", if self.pass() { "pass" } else { "fail" });
        s
    }
}

/// Percentile with linear interpolation between closest ranks; `xs` sorted.
pub(crate) fn percentile_sorted(xs: &[f64], q: f64) -> f64 {
    if xs.len() == 1 {
        return xs[0];
    }
    let pos = q * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    xs[lo] + (xs[hi] - xs[lo]) * (pos - lo as f64)
}

pub fn latency_report(trace: &[LatencySample], budget_ms: f64) -> Result<LatencyReport, TransportError> {
    if trace.is_empty() {
        return Err(TransportError::EmptyTrace);
    }
    let lat: Vec<f64> = trace.iter().map(|s| s.latency_ms()).collect();
    let mut sorted = lat.clone();
    sorted.sort_by(f64::total_cmp);
    let violations = trace
        .iter()
        .zip(&lat)
        .filter(|(_, l)| **l > budget_ms)
        .map(|(s, l)| (s.seq, *l))
        .collect();
    Ok(LatencyReport {
        count: trace.len(),
        mean_ms: lat.iter().sum::<f64>() / lat.len() as f64,
        p95_ms: percentile_sorted(&sorted, 0.95),
        max_ms: *sorted.last().expect("non-empty"),
        budget_ms,
        violations,
    })
}

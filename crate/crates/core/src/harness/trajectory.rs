//! Scripted leader motion: Catmull-Rom interpolation of timed waypoints.

use crate::frames::Vec3;

use super::config::{ClutchEvent, Waypoint};

/// Smooth path through timed waypoints. Interior tangents are central
/// differences over the neighbouring waypoints; the path starts and ends at
/// rest and holds the end points outside the scripted interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderPath {
    times: Vec<f64>,
    points: Vec<Vec3>,
    tangents: Vec<Vec3>,
}

impl LeaderPath {
    /// `waypoints` must be non-empty with strictly increasing times.
    pub fn new(waypoints: &[Waypoint]) -> Self {
        let times: Vec<f64> = waypoints.iter().map(|w| w.t_s).collect();
        let points: Vec<Vec3> = waypoints.iter().map(|w| Vec3::from(w.p_mm)).collect();
        let n = points.len();
        let tangents = (0..n)
            .map(|i| {
                if i == 0 || i + 1 == n {
                    Vec3::zeros()
                } else {
                    (points[i + 1] - points[i - 1]) / (times[i + 1] - times[i - 1])
                }
            })
            .collect();
        Self { times, points, tangents }
    }

    pub fn sample(&self, t: f64) -> Vec3 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.points[0];
        }
        if t >= self.times[n - 1] {
            return self.points[n - 1];
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.points[i] * h00 + self.tangents[i] * (h10 * h) + self.points[i + 1] * h01 + self.tangents[i + 1] * (h11 * h)
    }
}

/// Clutch state at `t` given a time-ordered change list; engaged at start.
pub fn clutch_at(events: &[ClutchEvent], t: f64) -> bool {
    events.iter().take_while(|e| e.t_s <= t).last().map_or(true, |e| e.engaged)
}

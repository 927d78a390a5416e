//! Two-way four-timestamp clock offset estimation.

use super::TransportError;

/// Result of the most recent synchronization round. `offset_us` is
/// remote clock minus local clock.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClockSyncState {
    pub offset_us: f64,
    pub last_round_time_us: i64,
    pub rtt_us: i64,
}

impl ClockSyncState {
    /// Maps a remote timestamp onto the local clock.
    pub fn to_local(&self, remote_us: i64) -> f64 {
        remote_us as f64 - self.offset_us
    }
}

/// `t1` local send, `t2` remote receive, `t3` remote send, `t4` local receive.
pub fn clock_sync_round(t1: i64, t2: i64, t3: i64, t4: i64) -> Result<ClockSyncState, TransportError> {
    if t4 < t1 || t3 < t2 {
        return Err(TransportError::NonCausalTimestamps { t1, t2, t3, t4 });
    }
    let offset_us = ((t2 - t1) as f64 + (t3 - t4) as f64) / 2.0;
    let rtt_us = (t4 - t1) - (t3 - t2);
    if rtt_us < 0 {
        return Err(TransportError::NonCausalTimestamps { t1, t2, t3, t4 });
    }
    Ok(ClockSyncState {
        offset_us,
        last_round_time_us: t4,
        rtt_us,
    })
}

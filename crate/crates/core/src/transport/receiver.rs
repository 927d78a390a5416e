//! Latest-valid receive policy and the link watchdog.

use super::datagram::Datagram;
use super::TransportError;

/// Serial-number comparison over half the 32-bit range: `a` is newer than
/// `b` when it is ahead by less than 2^31.
pub fn seq_newer(a: u32, b: u32) -> bool {
    a != b && (a.wrapping_sub(b) as i32) > 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    Live,
    SampleHold,
    SafeHold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    DiscardStale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatestValidReceiver {
    last_seq: Option<u32>,
    last_payload: Option<Datagram>,
    last_recv_time_us: u64,
    mode: LinkMode,
    accepted: u64,
    discarded: u64,
}

impl LatestValidReceiver {
    /// A receiver that has heard nothing since `now_us`.
    pub fn new(now_us: u64) -> Self {
        Self {
            last_seq: None,
            last_payload: None,
            last_recv_time_us: now_us,
            mode: LinkMode::Live,
            accepted: 0,
            discarded: 0,
        }
    }

    pub fn last_seq(&self) -> Option<u32> {
        self.last_seq
    }

    pub fn last_payload(&self) -> Option<&Datagram> {
        self.last_payload.as_ref()
    }

    pub fn last_recv_time_us(&self) -> u64 {
        self.last_recv_time_us
    }

    pub fn mode(&self) -> LinkMode {
        self.mode
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    /// Accepts `dg` only if its sequence number is strictly newer than
    /// everything accepted so far.
    pub fn receive(&mut self, dg: &Datagram, now_us: u64) -> Verdict {
        let fresh = match self.last_seq {
            None => true,
            Some(last) => seq_newer(dg.seq, last),
        };
        if !fresh {
            self.discarded += 1;
            return Verdict::DiscardStale;
        }
        self.last_seq = Some(dg.seq);
        self.last_payload = Some(*dg);
        self.last_recv_time_us = now_us;
        self.mode = LinkMode::Live;
        self.accepted += 1;
        Verdict::Accept
    }

    pub fn receive_bytes(&mut self, bytes: &[u8], now_us: u64) -> Result<(Verdict, Datagram), TransportError> {
        let dg = Datagram::decode(bytes)?;
        Ok((self.receive(&dg, now_us), dg))
    }

    /// Updates and returns the link mode for the silence observed at `now_us`.
    pub fn poll(&mut self, now_us: u64, cfg: &WatchdogConfig) -> LinkMode {
        self.mode = watchdog_poll(self, now_us, cfg);
        self.mode
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WatchdogConfig {
    pub t_wd_us: u64,
    pub command_period_us: f64,
}

impl Default for WatchdogConfig {
    fn default() -> Self {
        Self {
            t_wd_us: 100_000,
            command_period_us: 1e6 / 90.0,
        }
    }
}

impl WatchdogConfig {
    pub fn validate(&self) -> Result<(), TransportError> {
        if !(self.command_period_us > 0.0) || (self.t_wd_us as f64) <= self.command_period_us {
            return Err(TransportError::InvalidConfig(format!(
                "watchdog timeout {} us must exceed the command period {} us",
                self.t_wd_us, self.command_period_us
            )));
        }
        Ok(())
    }
}

/// Live while silence fits one command period, sample-and-hold up to and
/// including `t_wd`, safe-hold beyond it.
pub fn watchdog_poll(rx: &LatestValidReceiver, now_us: u64, cfg: &WatchdogConfig) -> LinkMode {
    let silence = now_us.saturating_sub(rx.last_recv_time_us);
    if silence as f64 <= cfg.command_period_us {
        LinkMode::Live
    } else if silence <= cfg.t_wd_us {
        LinkMode::SampleHold
    } else {
        LinkMode::SafeHold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::Vec3;

    fn dg(seq: u32) -> Datagram {
        Datagram::new(seq, 0, Vec3::zeros(), true)
    }

    #[test]
    fn in_order_accepted() {
        let mut rx = LatestValidReceiver::new(0);
        for s in 1..=3 {
            assert_eq!(rx.receive(&dg(s), s as u64), Verdict::Accept);
        }
        assert_eq!(rx.last_seq(), Some(3));
    }

    #[test]
    fn stale_and_duplicate_discarded() {
        let mut rx = LatestValidReceiver::new(0);
        rx.receive(&dg(5), 10);
        assert_eq!(rx.receive(&dg(3), 20), Verdict::DiscardStale);
        assert_eq!(rx.receive(&dg(5), 30), Verdict::DiscardStale);
        assert_eq!(rx.last_recv_time_us(), 10);
        assert_eq!(rx.discarded(), 2);
    }

    #[test]
    fn pairwise_policy_by_enumeration() {
        for first in 0..8u32 {
            for second in 0..8u32 {
                let mut rx = LatestValidReceiver::new(0);
                rx.receive(&dg(first), 0);
                let want = if second > first { Verdict::Accept } else { Verdict::DiscardStale };
                assert_eq!(rx.receive(&dg(second), 1), want, "{first} then {second}");
            }
        }
    }

    #[test]
    fn sequence_wraps() {
        assert!(seq_newer(0, u32::MAX));
        assert!(seq_newer(5, u32::MAX - 5));
        assert!(!seq_newer(u32::MAX, 0));
        let mut rx = LatestValidReceiver::new(0);
        rx.receive(&dg(u32::MAX - 1), 0);
        assert_eq!(rx.receive(&dg(1), 1), Verdict::Accept);
    }

    #[test]
    fn watchdog_thresholds() {
        let cfg = WatchdogConfig::default();
        let mut rx = LatestValidReceiver::new(0);
        rx.receive(&dg(1), 1_000_000);
        assert_eq!(rx.poll(1_005_000, &cfg), LinkMode::Live);
        assert_eq!(rx.poll(1_040_000, &cfg), LinkMode::SampleHold);
        assert_eq!(rx.poll(1_100_000, &cfg), LinkMode::SampleHold);
        assert_eq!(rx.poll(1_100_001, &cfg), LinkMode::SafeHold);
        assert_eq!(rx.poll(1_150_000, &cfg), LinkMode::SafeHold);
        rx.receive(&dg(2), 1_160_000);
        assert_eq!(rx.mode(), LinkMode::Live);
    }

    #[test]
    fn watchdog_config_validation() {
        assert!(WatchdogConfig::default().validate().is_ok());
        let bad = WatchdogConfig {
            t_wd_us: 5_000,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

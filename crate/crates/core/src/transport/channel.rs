//! Deterministic lossy datagram channel on a simulated microsecond clock.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TransportError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    #[serde(default)]
    pub loss_prob: f64,
    /// Base one-way delay, ms.
    #[serde(default)]
    pub delay_ms: f64,
    /// Extra delay drawn uniformly from `[0, jitter_ms)`.
    #[serde(default)]
    pub jitter_ms: f64,
    /// When false, delivery is FIFO even if jitter would overtake.
    #[serde(default)]
    pub reorder: bool,
    /// Windows `[start, start + duration)` of send time in which every
    /// datagram is dropped.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outages: Vec<Outage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outage {
    pub start_ms: f64,
    pub duration_ms: f64,
}

impl Outage {
    fn covers(&self, t_us: u64) -> bool {
        let t_ms = t_us as f64 / 1000.0;
        t_ms >= self.start_ms && t_ms < self.start_ms + self.duration_ms
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            loss_prob: 0.0,
            delay_ms: 0.0,
            jitter_ms: 0.0,
            reorder: false,
            outages: Vec::new(),
        }
    }
}

impl ChannelModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(TransportError::InvalidConfig(format!("loss {} outside [0, 1]", self.loss_prob)));
        }
        if !(self.delay_ms >= 0.0 && self.delay_ms.is_finite()) || !(self.jitter_ms >= 0.0 && self.jitter_ms.is_finite()) {
            return Err(TransportError::InvalidConfig("delay and jitter must be >= 0".into()));
        }
        if self.outages.iter().any(|o| !(o.duration_ms >= 0.0) || !o.start_ms.is_finite()) {
            return Err(TransportError::InvalidConfig("outage durations must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct InFlight {
    deliver_at_us: u64,
    order: u64,
    bytes: Vec<u8>,
}

/// What happened to one `send`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendFate {
    Dropped,
    Scheduled { deliver_at_us: u64 },
}

#[derive(Debug, Clone)]
pub struct SimChannel {
    model: ChannelModel,
    rng: ChaCha8Rng,
    inflight: Vec<InFlight>,
    next_order: u64,
    last_deliver_at_us: u64,
}

impl SimChannel {
    pub fn new(model: ChannelModel, seed: u64) -> Self {
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            inflight: Vec::new(),
            next_order: 0,
            last_deliver_at_us: 0,
        }
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn in_flight(&self) -> usize {
        self.inflight.len()
    }

    pub fn send(&mut self, bytes: &[u8], now_us: u64) -> SendFate {
        // Both draws happen on every send so the random stream does not
        // depend on earlier outcomes.
        let loss_draw: f64 = self.rng.gen();
        let jitter_draw: f64 = self.rng.gen();
        if loss_draw < self.model.loss_prob || self.model.outages.iter().any(|o| o.covers(now_us)) {
            return SendFate::Dropped;
        }
        let delay_us = (self.model.delay_ms + jitter_draw * self.model.jitter_ms) * 1000.0;
        let mut deliver_at_us = now_us + delay_us.round() as u64;
        if !self.model.reorder {
            deliver_at_us = deliver_at_us.max(self.last_deliver_at_us);
        }
        self.last_deliver_at_us = self.last_deliver_at_us.max(deliver_at_us);
        self.inflight.push(InFlight {
            deliver_at_us,
            order: self.next_order,
            bytes: bytes.to_vec(),
        });
        self.next_order += 1;
        SendFate::Scheduled { deliver_at_us }
    }

    /// Removes and returns every datagram due at or before `now_us`, in
    /// arrival order (ties by send order).
    pub fn poll(&mut self, now_us: u64) -> Vec<Delivered> {
        let mut due: Vec<InFlight> = Vec::new();
        let mut i = 0;
        while i < self.inflight.len() {
            if self.inflight[i].deliver_at_us <= now_us {
                due.push(self.inflight.swap_remove(i));
            } else {
                i += 1;
            }
        }
        due.sort_by_key(|d| (d.deliver_at_us, d.order));
        due.into_iter()
            .map(|d| Delivered {
                arrival_us: d.deliver_at_us,
                bytes: d.bytes,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivered {
    pub arrival_us: u64,
    pub bytes: Vec<u8>,
}

/// Sends each `(time, payload)` and polls at every arrival; convenience for
/// building delivery traces.
pub fn channel_trace(model: &ChannelModel, seed: u64, sends: &[(u64, Vec<u8>)]) -> Vec<Delivered> {
    let mut ch = SimChannel::new(model.clone(), seed);
    for (t, bytes) in sends {
        ch.send(bytes, *t);
    }
    ch.poll(u64::MAX)
}

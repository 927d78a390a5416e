//! Datagram transport: wire format, latest-valid receive policy, watchdog,
//! clock synchronization, a seeded fault-injecting channel and latency
//! accounting.

pub mod channel;
pub mod clock;
pub mod datagram;
pub mod latency;
pub mod receiver;
pub mod udp;

use thiserror::Error;

pub use channel::{ChannelModel, Delivered, Outage, SendFate, SimChannel};
pub use clock::{clock_sync_round, ClockSyncState};
pub use datagram::{Datagram, DATAGRAM_LEN};
pub use latency::{latency_report, LatencyReport, LatencySample, FRAME_BUDGET_MS};
pub use receiver::{seq_newer, watchdog_poll, LatestValidReceiver, LinkMode, Verdict, WatchdogConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("malformed datagram: {0}")]
    MalformedDatagram(String),
    #[error("non-causal timestamps t1={t1} t2={t2} t3={t3} t4={t4}")]
    NonCausalTimestamps { t1: i64, t2: i64, t3: i64, t4: i64 },
    #[error("latency trace is empty")]
    EmptyTrace,
    #[error("invalid transport config: {0}")]
    InvalidConfig(String),
}

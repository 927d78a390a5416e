//! Fixed 38-byte little-endian command datagram.
//!
//! | offset | size | field                       |
//! |--------|------|-----------------------------|
//! | 0      | 4    | seq (u32)                   |
//! | 4      | 8    | send_time_us (u64)          |
//! | 12     | 24   | increment x, y, z (f64, mm) |
//! | 36     | 1    | clutch flag (0 or 1)        |
//! | 37     | 1    | reserved, written as 0      |

use super::TransportError;
use crate::frames::Vec3;

pub const DATAGRAM_LEN: usize = 38;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Datagram {
    pub seq: u32,
    pub send_time_us: u64,
    pub increment: [f64; 3],
    pub clutch: bool,
}

impl Datagram {
    pub fn new(seq: u32, send_time_us: u64, increment: Vec3, clutch: bool) -> Self {
        Self {
            seq,
            send_time_us,
            increment: [increment.x, increment.y, increment.z],
            clutch,
        }
    }

    pub fn increment(&self) -> Vec3 {
        Vec3::from(self.increment)
    }

    pub fn encode(&self) -> [u8; DATAGRAM_LEN] {
        let mut buf = [0u8; DATAGRAM_LEN];
        buf[0..4].copy_from_slice(&self.seq.to_le_bytes());
        buf[4..12].copy_from_slice(&self.send_time_us.to_le_bytes());
        for (i, v) in self.increment.iter().enumerate() {
            let at = 12 + 8 * i;
            buf[at..at + 8].copy_from_slice(&v.to_le_bytes());
        }
        buf[36] = self.clutch as u8;
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TransportError> {
        if bytes.len() != DATAGRAM_LEN {
            return Err(TransportError::MalformedDatagram(format!(
                "expected {DATAGRAM_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        let clutch = match bytes[36] {
            0 => false,
            1 => true,
            other => {
                return Err(TransportError::MalformedDatagram(format!("clutch flag {other}")));
            }
        };
        Ok(Self {
            seq: u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")),
            send_time_us: u64_at(4),
            increment: [
                f64::from_bits(u64_at(12)),
                f64::from_bits(u64_at(20)),
                f64::from_bits(u64_at(28)),
            ],
            clutch,
        })
    }
}

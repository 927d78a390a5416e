//! Real UDP loopback link for integration checks.
//!
//! A receiver thread applies the latest-valid policy and publishes a
//! snapshot; readers copy the snapshot and never wait on the socket.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::datagram::{Datagram, DATAGRAM_LEN};
use super::latency::LatencySample;
use super::receiver::{LatestValidReceiver, Verdict};
use crate::frames::Vec3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub latest: Option<Datagram>,
    pub accepted: u64,
    pub discarded: u64,
    pub malformed: u64,
    pub latencies: Vec<LatencySample>,
}

pub struct LoopbackReceiver {
    addr: SocketAddr,
    shared: Arc<Mutex<Snapshot>>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl LoopbackReceiver {
    /// Binds `127.0.0.1:0`. `epoch` is the clock shared with the sender.
    pub fn spawn(epoch: Instant) -> io::Result<Self> {
        let socket = UdpSocket::bind("127.0.0.1:0")?;
        socket.set_read_timeout(Some(Duration::from_millis(5)))?;
        let addr = socket.local_addr()?;
        let shared = Arc::new(Mutex::new(Snapshot::default()));
        let stop = Arc::new(AtomicBool::new(false));
        let (shared_t, stop_t) = (Arc::clone(&shared), Arc::clone(&stop));
        let handle = thread::spawn(move || {
            let mut rx = LatestValidReceiver::new(0);
            let mut buf = [0u8; 64];
            while !stop_t.load(Ordering::Relaxed) {
                let n = match socket.recv(&mut buf) {
                    Ok(n) => n,
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
                    Err(_) => break,
                };
                let now_us = epoch.elapsed().as_micros() as u64;
                let mut snap = shared_t.lock().expect("snapshot lock");
                match rx.receive_bytes(&buf[..n], now_us) {
                    Ok((Verdict::Accept, dg)) => {
                        snap.latest = Some(dg);
                        snap.accepted += 1;
                        snap.latencies.push(LatencySample {
                            seq: dg.seq,
                            send_us: dg.send_time_us,
                            apply_us: now_us,
                        });
                    }
                    Ok((Verdict::DiscardStale, _)) => snap.discarded += 1,
                    Err(_) => snap.malformed += 1,
                }
            }
        });
        Ok(Self {
            addr,
            shared,
            stop,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn snapshot(&self) -> Snapshot {
        self.shared.lock().expect("snapshot lock").clone()
    }

    pub fn shutdown(mut self) -> Snapshot {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
        self.snapshot()
    }
}

impl Drop for LoopbackReceiver {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Sends `count` datagrams at `period` over loopback, in the order given by
/// `order` (indices into `0..count`), and returns the receiver's snapshot.
pub fn run_loopback(count: u32, period: Duration, order: Option<&[u32]>) -> io::Result<Snapshot> {
    let epoch = Instant::now();
    let rx = LoopbackReceiver::spawn(epoch)?;
    let tx = UdpSocket::bind("127.0.0.1:0")?;
    let seqs: Vec<u32> = match order {
        Some(o) => o.to_vec(),
        None => (1..=count).collect(),
    };
    for seq in seqs {
        let dg = Datagram::new(seq, epoch.elapsed().as_micros() as u64, Vec3::new(0.01, 0.0, 0.0), true);
        let bytes: [u8; DATAGRAM_LEN] = dg.encode();
        tx.send_to(&bytes, rx.addr())?;
        thread::sleep(period);
    }
    thread::sleep(Duration::from_millis(30));
    Ok(rx.shutdown())
}

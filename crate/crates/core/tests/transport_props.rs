use proptest::prelude::*;

use twin_teleop::transport::{
    clock_sync_round, latency_report, seq_newer, watchdog_poll, ChannelModel, Datagram, LatencySample, LatestValidReceiver,
    LinkMode, SimChannel, TransportError, Verdict, WatchdogConfig,
};
use twin_teleop::Vec3;

#[test]
fn duplicate_sequence_is_stale() {
    let mut rx = LatestValidReceiver::new(0);
    let dg = Datagram::new(5, 0, Vec3::zeros(), true);
    assert_eq!(rx.receive(&dg, 10), Verdict::Accept);
    assert_eq!(rx.receive(&dg, 20), Verdict::DiscardStale);
    assert_eq!(rx.receive(&Datagram::new(4, 0, Vec3::zeros(), true), 30), Verdict::DiscardStale);
    assert_eq!(rx.last_seq(), Some(5));
}

#[test]
fn sequence_comparison_survives_wrap() {
    assert!(seq_newer(0, u32::MAX));
    assert!(seq_newer(3, u32::MAX - 2));
    assert!(!seq_newer(u32::MAX, 0));
}

#[test]
fn malformed_bytes_are_rejected() {
    assert!(matches!(Datagram::decode(&[0u8; 10]), Err(TransportError::MalformedDatagram(_))));
    let mut b = Datagram::new(1, 2, Vec3::zeros(), false).encode();
    b[36] = 7;
    assert!(Datagram::decode(&b).is_err());
}

#[test]
fn latency_budget_examples() {
    let ok: Vec<LatencySample> = (0..50).map(|i| LatencySample { seq: i, send_us: 1000 * i as u64, apply_us: 1000 * i as u64 + 5000 }).collect();
    assert!(latency_report(&ok, 11.1).unwrap().pass());
    let mut bad = ok.clone();
    bad[7].apply_us = bad[7].send_us + 15_000;
    let r = latency_report(&bad, 11.1).unwrap();
    assert!(!r.pass());
    assert_eq!(r.violations, vec![(7, 15.0)]);
    assert_eq!(latency_report(&[], 11.1), Err(TransportError::EmptyTrace));
}

proptest! {
    #[test]
    fn encode_decode_is_identity(seq in any::<u32>(), t in any::<u64>(), x in any::<f64>(), y in any::<f64>(), z in any::<f64>(), c in any::<bool>()) {
        let dg = Datagram { seq, send_time_us: t, increment: [x, y, z], clutch: c };
        let back = Datagram::decode(&dg.encode()).unwrap();
        prop_assert_eq!(back.seq, seq);
        prop_assert_eq!(back.send_time_us, t);
        prop_assert_eq!(back.clutch, c);
        for i in 0..3 {
            prop_assert_eq!(back.increment[i].to_bits(), dg.increment[i].to_bits());
        }
    }

    #[test]
    fn receiver_tracks_max_delivered_seq(
        seed in any::<u64>(),
        loss in 0.0..0.9f64,
        delay in 0.0..5.0f64,
        jitter in 0.0..40.0f64,
        n in 1usize..200,
    ) {
        let model = ChannelModel { loss_prob: loss, delay_ms: delay, jitter_ms: jitter, reorder: true, outages: vec![] };
        let mut ch = SimChannel::new(model, seed);
        let mut rx = LatestValidReceiver::new(0);
        let mut applied: Vec<u32> = Vec::new();
        let mut max_seen: Option<u32> = None;
        let end = n as u64 * 11_112 + 100_000;
        let mut sent = 0usize;
        for t in (0..end).step_by(1000) {
            while sent < n && sent as u64 * 11_112 <= t {
                ch.send(&Datagram::new(sent as u32, t, Vec3::zeros(), true).encode(), t);
                sent += 1;
            }
            for d in ch.poll(t) {
                let (v, dg) = rx.receive_bytes(&d.bytes, t).unwrap();
                max_seen = Some(max_seen.map_or(dg.seq, |m: u32| m.max(dg.seq)));
                if v == Verdict::Accept {
                    applied.push(dg.seq);
                }
                prop_assert_eq!(rx.last_seq(), max_seen);
            }
        }
        prop_assert!(applied.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn watchdog_threshold_is_exact(last in 0u64..1_000_000, silence in 0u64..300_000, t_wd in 20_000u64..200_000) {
        let cfg = WatchdogConfig { t_wd_us: t_wd, command_period_us: 1e6 / 90.0 };
        let mut rx = LatestValidReceiver::new(0);
        rx.receive(&Datagram::new(0, 0, Vec3::zeros(), true), last);
        let mode = watchdog_poll(&rx, last + silence, &cfg);
        prop_assert_eq!(mode == LinkMode::SafeHold, silence > t_wd);
    }

    #[test]
    fn clock_error_within_half_rtt(
        t1 in 0i64..1_000_000_000,
        d1 in 0i64..50_000,
        d2 in 0i64..50_000,
        turn in 0i64..5_000,
        offset in -1_000_000i64..1_000_000,
    ) {
        let t2 = t1 + d1 + offset;
        let t3 = t2 + turn;
        let t4 = t3 - offset + d2;
        let s = clock_sync_round(t1, t2, t3, t4).unwrap();
        prop_assert!(s.rtt_us >= 0);
        prop_assert!((s.offset_us - offset as f64).abs() <= s.rtt_us as f64 / 2.0);
        let sym = clock_sync_round(t1, t1 + d1 + offset, t1 + d1 + offset + turn, t1 + d1 + turn + d1).unwrap();
        prop_assert_eq!(sym.offset_us, offset as f64);
    }
}

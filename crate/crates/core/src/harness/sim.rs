//! Fixed-timestep simulation of the full loop on an integer microsecond
//! clock: leader frames at 90 Hz, follower servo ticks at 1 kHz.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::filter::{kf_step, FilterError, KalmanState};
use crate::frames::Vec3;
use crate::geometry::{contact_state, ContactState};
use crate::haptics::{HapticError, HapticRenderer, ToolState};
use crate::metrics::{Hand, TrajectorySample};
use crate::teleop::{apply_increment, clutch, update_link, Clutch, FollowerState, LinkStatus};
use crate::transport::{
    clock_sync_round, ClockSyncState, Datagram, LatencySample, LatestValidReceiver, LinkMode, SendFate, SimChannel,
    Verdict,
};

use super::config::{ConfigError, MaterialsBlock, ResolvedScenario, ScenarioConfig};
use super::runlog::{EventKind, LogEvent, RunLog};
use super::trajectory::{clutch_at, LeaderPath};

/// Render/command rate, Hz.
pub const RENDER_HZ: u64 = 90;
/// Servo period, µs.
pub const TICK_US: u64 = 1000;
/// Follower turnaround for a clock-sync probe, µs.
const SYNC_TURNAROUND_US: i64 = 50;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("haptic rendering failed: {0}")]
    Haptic(#[from] HapticError),
    #[error("leader filter failed: {0}")]
    Filter(#[from] FilterError),
}

/// Start of command frame `k`, µs.
pub fn frame_time_us(k: u64) -> u64 {
    (k * 1_000_000).div_ceil(RENDER_HZ)
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Per-tick output checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForceAudit {
    pub ticks: u64,
    pub max_force: f64,
    /// Largest change between consecutive outputs, N.
    pub max_step: f64,
    pub force_violations: u64,
    pub slew_violations: u64,
    pub bounds_violations: u64,
    pub first_violation: Option<String>,
}

impl ForceAudit {
    pub fn violations(&self) -> u64 {
        self.force_violations + self.slew_violations + self.bounds_violations
    }

    pub fn clean(&self) -> bool {
        self.violations() == 0
    }

    fn note(&mut self, msg: impl FnOnce() -> String) {
        if self.first_violation.is_none() {
            self.first_violation = Some(msg());
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HandStats {
    pub sent: u64,
    pub dropped: u64,
    pub accepted: u64,
    pub discarded: u64,
    pub safe_hold_entries: u64,
    pub ruptures: u32,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: RunLog,
    pub latency: Vec<LatencySample>,
    pub audit: ForceAudit,
    pub hands: Vec<(Hand, HandStats)>,
    pub clock: Vec<ClockSyncState>,
    pub latency_budget_ms: f64,
}

struct HandSim {
    hand: Hand,
    path: LeaderPath,
    clutch_events: Vec<super::config::ClutchEvent>,
    noise: Option<Normal<f64>>,
    noise_rng: ChaCha8Rng,
    kf: KalmanState,
    last_filtered: Option<Vec3>,
    seq: u32,
    channel: SimChannel,
    rx: LatestValidReceiver,
    link: LinkMode,
    follower: FollowerState,
    seg_start: Vec3,
    seg_end: Vec3,
    seg_t0_us: u64,
    tip: Vec3,
    tool: ToolState,
    contact: ContactState,
    stats: HandStats,
}

fn link_name(m: LinkMode) -> &'static str {
    match m {
        LinkMode::Live => "live",
        LinkMode::SampleHold => "sample_hold",
        LinkMode::SafeHold => "safe_hold",
    }
}

impl ResolvedScenario {
    /// Hash of the configuration with the material registry expanded inline,
    /// so it does not depend on where the registry file lives.
    pub fn canonical_hash(&self) -> String {
        let mut c = self.config.clone();
        c.materials = MaterialsBlock {
            presets: false,
            path: None,
            inline: self.materials.clone(),
        };
        c.hash()
    }
}

/// Validates and runs a scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    run_resolved(&cfg.resolve()?)
}

pub fn run_resolved(sc: &ResolvedScenario) -> Result<RunOutput, SimError> {
    let cfg = &sc.config;
    let renderer = HapticRenderer::new(
        crate::haptics::LawRegistry::builtin().build(&cfg.haptics.laws)?,
        sc.materials.clone(),
        cfg.haptics.limits,
    )?;
    let scene = &sc.scene;
    let offset = cfg.net.clock_offset_us;
    let local = |t: u64| (t as i64 + offset).max(0) as u64;

    let mut hands: Vec<HandSim> = {
        let mut trs: Vec<_> = cfg.trajectories.iter().collect();
        trs.sort_by_key(|t| t.hand);
        trs.into_iter()
            .map(|tr| {
                let h = tr.hand as u64;
                let start = cfg.follower_start(tr, &sc.hand_to_workspace);
                HandSim {
                    hand: tr.hand,
                    path: LeaderPath::new(&tr.waypoints),
                    clutch_events: tr.clutch.clone(),
                    noise: (tr.noise_mm > 0.0).then(|| Normal::new(0.0, tr.noise_mm).expect("noise >= 0")),
                    noise_rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2 + 2 * h)),
                    kf: KalmanState::new(),
                    last_filtered: None,
                    seq: 0,
                    channel: SimChannel::new(cfg.net.channel.clone(), derive_seed(cfg.seed, 1 + 2 * h)),
                    rx: LatestValidReceiver::new(local(0)),
                    link: LinkMode::Live,
                    follower: FollowerState::new(start),
                    seg_start: start,
                    seg_end: start,
                    seg_t0_us: 0,
                    tip: start,
                    tool: ToolState::default(),
                    contact: contact_state(scene, &start, &Vec3::zeros()),
                    stats: HandStats::default(),
                }
            })
            .collect()
    };

    let mut header = vec![
        ("scenario".to_owned(), cfg.name.clone()),
        ("seed".to_owned(), cfg.seed.to_string()),
        ("config_hash".to_owned(), sc.canonical_hash()),
        ("version".to_owned(), env!("CARGO_PKG_VERSION").to_owned()),
        ("laws".to_owned(), cfg.haptics.laws.join(" ")),
    ];
    if let Some(a) = cfg.anchor_mm {
        header.push(("anchor_mm".to_owned(), format!("{:.6},{:.6},{:.6}", a[0], a[1], a[2])));
    }
    let mut log = RunLog::new(header);
    let mut latency = Vec::new();
    let mut audit = ForceAudit::default();
    let mut clock = Vec::new();
    let mut clock_est = ClockSyncState::default();
    let mut sync_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 100));

    let limits = cfg.haptics.limits;
    let bounds = sc.teleop.workspace_bounds;
    let duration_us = (cfg.duration_s * 1e6).round() as u64;
    let sync_period_us = cfg.net.sync_period_ms * 1000;
    let period_us = 1e6 / RENDER_HZ as f64;
    let dt = renderer.servo_dt_s;
    let net = &cfg.net.channel;

    let (mut k, mut j) = (0u64, 0u64);
    loop {
        let tf = frame_time_us(k);
        let tt = j * TICK_US;
        let frame_due = tf <= duration_us;
        let tick_due = tt <= duration_us;
        if !frame_due && !tick_due {
            break;
        }
        if frame_due && (tf <= tt || !tick_due) {
            // Command frame: log the latest servo state, then send.
            let frame_ms = if k == 0 {
                frame_time_us(1) as f64 / 1000.0
            } else {
                (tf - frame_time_us(k - 1)) as f64 / 1000.0
            };
            let t_s = tf as f64 / 1e6;
            for hs in hands.iter_mut() {
                log.rows.push(TrajectorySample {
                    t_us: tf,
                    hand: hs.hand,
                    p: hs.tip,
                    force: hs.tool.force,
                    clearance: hs.contact.clearance,
                    in_contact: hs.contact.in_contact(),
                    punctures_cum: hs.tool.puncture.ruptures,
                    seq: hs.rx.last_seq().unwrap_or(0),
                    frame_ms,
                });

                let mut z = hs.path.sample(t_s);
                if let Some(n) = &hs.noise {
                    z += Vec3::new(n.sample(&mut hs.noise_rng), n.sample(&mut hs.noise_rng), n.sample(&mut hs.noise_rng));
                }
                hs.kf = kf_step(&hs.kf, &z, &cfg.kalman)?;
                let pos = hs.kf.position().expect("initialized after a step");
                let delta = hs.last_filtered.map_or(Vec3::zeros(), |p| pos - p);
                hs.last_filtered = Some(pos);
                let dg = Datagram::new(hs.seq, tf, delta, clutch_at(&hs.clutch_events, t_s));
                hs.seq = hs.seq.wrapping_add(1);
                hs.stats.sent += 1;
                if hs.channel.send(&dg.encode(), tf) == SendFate::Dropped {
                    hs.stats.dropped += 1;
                }
            }
            k += 1;
            continue;
        }

        // Servo tick.
        let now_local = local(tt);
        if tt % sync_period_us == 0 {
            let mut one_way = || {
                let d = net.delay_ms + sync_rng.gen::<f64>() * net.jitter_ms;
                (d * 1000.0).round() as i64
            };
            let t1 = tt as i64;
            let t2 = t1 + one_way() + offset;
            let t3 = t2 + SYNC_TURNAROUND_US;
            let t4 = t3 - offset + one_way();
            if let Ok(s) = clock_sync_round(t1, t2, t3, t4) {
                clock_est = s;
                clock.push(s);
                log.events.push(LogEvent {
                    t_us: tt,
                    hand: None,
                    kind: EventKind::ClockSync,
                    detail: format!("offset_us={:.1};rtt_us={}", s.offset_us, s.rtt_us),
                });
            }
        }

        for hs in hands.iter_mut() {
            for d in hs.channel.poll(tt) {
                match hs.rx.receive_bytes(&d.bytes, now_local) {
                    Ok((Verdict::Accept, dg)) => {
                        hs.stats.accepted += 1;
                        let apply_leader = (now_local as f64 - clock_est.offset_us).round().max(0.0) as u64;
                        latency.push(LatencySample {
                            seq: dg.seq,
                            send_us: dg.send_time_us,
                            apply_us: apply_leader.max(dg.send_time_us),
                        });
                        if hs.link != LinkMode::Live {
                            log.events.push(link_event(tt, hs.hand, hs.link, LinkMode::Live));
                            hs.link = LinkMode::Live;
                        }
                        hs.follower = update_link(&hs.follower, LinkStatus::Live);
                        let engaged = hs.follower.clutch == Clutch::Engaged;
                        if dg.clutch != engaged {
                            hs.follower = clutch(&hs.follower, dg.clutch);
                            log.events.push(LogEvent {
                                t_us: tt,
                                hand: Some(hs.hand),
                                kind: EventKind::Clutch,
                                detail: format!("engaged={}", dg.clutch),
                            });
                        }
                        let next = apply_increment(&hs.follower, &dg.increment(), &sc.teleop);
                        if next.pose != hs.follower.pose {
                            hs.seg_start = hs.tip;
                            hs.seg_end = next.pose;
                            hs.seg_t0_us = tt;
                        }
                        hs.follower = next;
                    }
                    Ok((Verdict::DiscardStale, dg)) => {
                        hs.stats.discarded += 1;
                        log.events.push(LogEvent {
                            t_us: tt,
                            hand: Some(hs.hand),
                            kind: EventKind::Discard,
                            detail: format!("seq={}", dg.seq),
                        });
                    }
                    Err(e) => log.events.push(LogEvent {
                        t_us: tt,
                        hand: Some(hs.hand),
                        kind: EventKind::Malformed,
                        detail: e.to_string().replace([',', '\n'], " "),
                    }),
                }
            }

            let mode = hs.rx.poll(now_local, &sc.watchdog);
            if mode != hs.link {
                log.events.push(link_event(tt, hs.hand, hs.link, mode));
                if mode == LinkMode::SafeHold {
                    hs.stats.safe_hold_entries += 1;
                    hs.follower = update_link(&hs.follower, LinkStatus::SafeHold);
                    hs.follower.pose = hs.tip;
                    hs.seg_start = hs.tip;
                    hs.seg_end = hs.tip;
                }
                hs.link = mode;
            }

            let prev_tip = hs.tip;
            let frac = ((tt - hs.seg_t0_us) as f64 / period_us).min(1.0);
            hs.tip = hs.seg_start + (hs.seg_end - hs.seg_start) * frac;
            let velocity = if j == 0 { Vec3::zeros() } else { (hs.tip - prev_tip) / dt };

            let prev_force = hs.tool.force;
            let out = renderer.tick(scene, &hs.tip, &velocity, &mut hs.tool, dt)?;
            let mag = out.force.norm();
            let step = (out.force - prev_force).norm();
            audit.ticks += 1;
            audit.max_force = audit.max_force.max(mag);
            audit.max_step = audit.max_step.max(step);
            if mag > limits.f_max * (1.0 + 1e-12) {
                audit.force_violations += 1;
                audit.note(|| format!("t={tt}us hand={} |F|={mag}", hs.hand));
            }
            if step > limits.max_step(dt) * (1.0 + 1e-9) {
                audit.slew_violations += 1;
                audit.note(|| format!("t={tt}us hand={} step={step}", hs.hand));
            }
            if !bounds.contains(&hs.tip) {
                audit.bounds_violations += 1;
                audit.note(|| format!("t={tt}us hand={} pose out of bounds", hs.hand));
            }
            if out.ruptured {
                hs.stats.ruptures += 1;
                log.events.push(LogEvent {
                    t_us: tt,
                    hand: Some(hs.hand),
                    kind: EventKind::Rupture,
                    detail: format!("count={};material={}", hs.tool.puncture.ruptures, out.contact.material),
                });
            }
            hs.contact = out.contact;
        }
        j += 1;
    }

    Ok(RunOutput {
        log,
        latency,
        audit,
        hands: hands.into_iter().map(|h| (h.hand, h.stats)).collect(),
        clock,
        latency_budget_ms: cfg.net.latency_budget_ms,
    })
}

fn link_event(t_us: u64, hand: Hand, from: LinkMode, to: LinkMode) -> LogEvent {
    LogEvent {
        t_us,
        hand: Some(hand),
        kind: EventKind::Link,
        detail: format!("from={};to={}", link_name(from), link_name(to)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_schedule_is_exact() {
        assert_eq!(frame_time_us(0), 0);
        assert_eq!(frame_time_us(1), 11_112);
        assert_eq!(frame_time_us(90), 1_000_000);
        for k in 0..900 {
            let n = (frame_time_us(k)..frame_time_us(k + 1)).filter(|t| t % TICK_US == 0).count();
            assert!(n == 11 || n == 12, "frame {k}: {n} ticks");
        }
    }

    #[test]
    fn seed_streams_differ() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
    }
}

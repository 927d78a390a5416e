//! Run-log persistence: CSV rows with a `#`-prefixed header block and
//! interleaved `#event` lines.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::frames::Vec3;
use crate::metrics::{Hand, MetricsReport, TrajectorySample};

pub const LOG_FORMAT: &str = "twin-teleop-runlog/1";
pub const COLUMNS: &str = "t_ms,hand,px,py,pz,fx,fy,fz,clearance_mm,contact,punctures_cum,seq,frame_ms";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunLogError {
    #[error("corrupt log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("cannot access {path}: {reason}")]
    Io { path: String, reason: String },
}

fn corrupt(line: usize, reason: impl Into<String>) -> RunLogError {
    RunLogError::CorruptLog {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Rupture,
    Link,
    Discard,
    Malformed,
    Clutch,
    ClockSync,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Rupture => "rupture",
            EventKind::Link => "link",
            EventKind::Discard => "discard",
            EventKind::Malformed => "malformed",
            EventKind::Clutch => "clutch",
            EventKind::ClockSync => "clock_sync",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "rupture" => EventKind::Rupture,
            "link" => EventKind::Link,
            "discard" => EventKind::Discard,
            "malformed" => EventKind::Malformed,
            "clutch" => EventKind::Clutch,
            "clock_sync" => EventKind::ClockSync,
            _ => return None,
        })
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A discrete simulation event. `detail` is `;`-separated `key=value` text
/// without commas or newlines.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEvent {
    pub t_us: u64,
    pub hand: Option<Hand>,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    header: Vec<(String, String)>,
    pub rows: Vec<TrajectorySample>,
    pub events: Vec<LogEvent>,
}

fn fmt_ms(t_us: u64) -> String {
    format!("{}.{:03}", t_us / 1000, t_us % 1000)
}

fn parse_ms(s: &str) -> Option<u64> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() || frac.len() > 3 || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let frac_us: u64 = if frac.is_empty() {
        0
    } else {
        format!("{frac:0<3}").parse().ok()?
    };
    int.parse::<u64>().ok()?.checked_mul(1000)?.checked_add(frac_us)
}

impl RunLog {
    pub fn new(header: Vec<(String, String)>) -> Self {
        let mut h = vec![("format".to_owned(), LOG_FORMAT.to_owned())];
        h.extend(header.into_iter().filter(|(k, _)| k != "format"));
        Self {
            header: h,
            rows: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn header(&self) -> &[(String, String)] {
        &self.header
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn scenario(&self) -> &str {
        self.header_value("scenario").unwrap_or("")
    }

    pub fn seed(&self) -> Option<u64> {
        self.header_value("seed").and_then(|s| s.parse().ok())
    }

    pub fn config_hash(&self) -> Option<&str> {
        self.header_value("config_hash")
    }

    pub fn anchor(&self) -> Option<Vec3> {
        let v: Vec<f64> = self
            .header_value("anchor_mm")?
            .split(',')
            .map(|s| s.trim().parse().ok())
            .collect::<Option<_>>()?;
        (v.len() == 3).then(|| Vec3::new(v[0], v[1], v[2]))
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &LogEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    fn write_row(out: &mut String, s: &TrajectorySample) {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{:.3}",
            fmt_ms(s.t_us),
            s.hand.code(),
            s.p.x,
            s.p.y,
            s.p.z,
            s.force.x,
            s.force.y,
            s.force.z,
            s.clearance,
            u8::from(s.in_contact),
            s.punctures_cum,
            s.seq,
            s.frame_ms
        );
    }

    fn write_event(out: &mut String, e: &LogEvent) {
        let hand = e.hand.map_or("-", |h| h.code());
        let _ = writeln!(out, "#event,{},{},{},{}", fmt_ms(e.t_us), hand, e.kind, e.detail);
    }

    /// Canonical text form: header, column line, then rows and events
    /// merged by time with events first on ties.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(COLUMNS);
        out.push('\n');
        let mut ev = self.events.iter().peekable();
        for row in &self.rows {
            while let Some(e) = ev.next_if(|e| e.t_us <= row.t_us) {
                Self::write_event(&mut out, e);
            }
            Self::write_row(&mut out, row);
        }
        for e in ev {
            Self::write_event(&mut out, e);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, RunLogError> {
        let mut header = Vec::new();
        let mut rows = Vec::new();
        let mut events = Vec::new();
        let mut seen_columns = false;
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            if let Some(rest) = line.strip_prefix("#event,") {
                events.push(parse_event(rest).ok_or_else(|| corrupt(n, "bad event line"))?);
            } else if let Some(rest) = line.strip_prefix("# ") {
                if seen_columns {
                    return Err(corrupt(n, "header line after data"));
                }
                let (k, v) = rest.split_once(": ").ok_or_else(|| corrupt(n, "bad header line"))?;
                header.push((k.to_owned(), v.to_owned()));
            } else if line == COLUMNS {
                if seen_columns {
                    return Err(corrupt(n, "duplicate column line"));
                }
                seen_columns = true;
            } else if line.is_empty() {
                continue;
            } else {
                if !seen_columns {
                    return Err(corrupt(n, "data before column line"));
                }
                rows.push(parse_row(line).map_err(|r| corrupt(n, r))?);
            }
        }
        match header.first() {
            Some((k, v)) if k == "format" && v == LOG_FORMAT => {}
            _ => return Err(corrupt(1, format!("missing `# format: {LOG_FORMAT}` header"))),
        }
        if !seen_columns {
            return Err(corrupt(header.len() + 1, "missing column line"));
        }
        Ok(Self { header, rows, events })
    }

    pub fn write(&self, path: &Path) -> Result<(), RunLogError> {
        fs::write(path, self.to_csv()).map_err(|e| RunLogError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self, RunLogError> {
        let text = fs::read_to_string(path).map_err(|e| RunLogError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_csv(&text)
    }
}

fn parse_event(rest: &str) -> Option<LogEvent> {
    let mut it = rest.splitn(4, ',');
    let t_us = parse_ms(it.next()?)?;
    let hand = match it.next()? {
        "-" => None,
        h => Some(Hand::from_code(h)?),
    };
    let kind = EventKind::parse(it.next()?)?;
    let detail = it.next().unwrap_or("").to_owned();
    Some(LogEvent { t_us, hand, kind, detail })
}

fn parse_row(line: &str) -> Result<TrajectorySample, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 13 {
        return Err(format!("expected 13 fields, got {}", f.len()));
    }
    let num = |i: usize| -> Result<f64, String> {
        let v: f64 = f[i].parse().map_err(|_| format!("field {} is not a number: `{}`", i + 1, f[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("field {} is not finite", i + 1))
        }
    };
    let int = |i: usize| -> Result<u32, String> { f[i].parse().map_err(|_| format!("field {} is not an integer: `{}`", i + 1, f[i])) };
    let contact = match f[9] {
        "0" => false,
        "1" => true,
        other => return Err(format!("contact flag must be 0 or 1, got `{other}`")),
    };
    Ok(TrajectorySample {
        t_us: parse_ms(f[0]).ok_or_else(|| format!("bad time `{}`", f[0]))?,
        hand: Hand::from_code(f[1]).ok_or_else(|| format!("bad hand `{}`", f[1]))?,
        p: Vec3::new(num(2)?, num(3)?, num(4)?),
        force: Vec3::new(num(5)?, num(6)?, num(7)?),
        clearance: num(8)?,
        in_contact: contact,
        punctures_cum: int(10)?,
        seq: int(11)?,
        frame_ms: num(12)?,
    })
}

/// Metrics for a log, using `apex` or else the anchor recorded in the header.
pub fn replay_metrics(log: &RunLog, apex: Option<&Vec3>) -> Result<MetricsReport, RunLogError> {
    if log.header_value("format") != Some(LOG_FORMAT) {
        return Err(corrupt(1, "missing format header"));
    }
    let header_anchor = log.anchor();
    let apex = apex.or(header_anchor.as_ref());
    MetricsReport::compute(log.scenario(), log.seed(), &log.rows, apex).map_err(|e| corrupt(0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log() -> RunLog {
        let mut log = RunLog::new(vec![
            ("scenario".into(), "unit".into()),
            ("seed".into(), "4".into()),
            ("anchor_mm".into(), "1.000000,2.000000,3.000000".into()),
        ]);
        for (i, t) in [0u64, 11112, 22223].iter().enumerate() {
            log.rows.push(TrajectorySample {
                t_us: *t,
                hand: Hand::Right,
                p: Vec3::new(i as f64 * 0.1, -0.000_000_1, 1.0 / 3.0),
                force: Vec3::new(0.0, 0.0, 0.8),
                clearance: 0.25,
                in_contact: i == 1,
                punctures_cum: i as u32,
                seq: i as u32,
                frame_ms: 11.111,
            });
        }
        log.events.push(LogEvent {
            t_us: 5000,
            hand: Some(Hand::Right),
            kind: EventKind::Rupture,
            detail: "count=1".into(),
        });
        log.events.push(LogEvent {
            t_us: 30000,
            hand: None,
            kind: EventKind::ClockSync,
            detail: "offset_us=1.5;rtt_us=4000".into(),
        });
        log
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = log().to_csv();
        let back = RunLog::from_csv(&text).unwrap();
        assert_eq!(back.to_csv(), text);
        assert_eq!(back.rows.len(), 3);
        assert_eq!(back.events.len(), 2);
        assert_eq!(back.seed(), Some(4));
        assert_eq!(back.anchor(), Some(Vec3::new(1.0, 2.0, 3.0)));
        assert_eq!(back.rows[1].t_us, 11112);
    }

    #[test]
    fn events_precede_rows_at_later_times() {
        let text = log().to_csv();
        let lines: Vec<&str> = text.lines().collect();
        let ev = lines.iter().position(|l| l.starts_with("#event,5.000")).unwrap();
        let row = lines.iter().position(|l| l.starts_with("11.112,")).unwrap();
        assert!(ev < row);
        assert!(lines.last().unwrap().starts_with("#event,30.000"));
    }

    #[test]
    fn corrupt_inputs() {
        assert!(RunLog::from_csv("").is_err());
        let text = log().to_csv();
        assert!(RunLog::from_csv(&text.replace("# format: ", "# fmt: ")).is_err());
        let bad = text.replace("11.112,R", "11.1125,R");
        assert!(matches!(RunLog::from_csv(&bad), Err(RunLogError::CorruptLog { .. })));
        let bad = text.replacen(",1,1,1,", ",7,1,1,", 1);
        assert!(RunLog::from_csv(&bad).is_err());
    }

    #[test]
    fn ms_parsing() {
        assert_eq!(parse_ms("0.000"), Some(0));
        assert_eq!(parse_ms("12.5"), Some(12_500));
        assert_eq!(parse_ms("3"), Some(3000));
        assert_eq!(parse_ms("-1.0"), None);
        assert_eq!(parse_ms("1.2345"), None);
    }

    #[test]
    fn replay_uses_header_anchor_and_is_pure() {
        let l = log();
        let a = replay_metrics(&l, None).unwrap();
        assert_eq!(a, replay_metrics(&l, None).unwrap());
        assert!(a.d_mean.is_some());
        assert_eq!(a.n_puncture, 2);
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use twin_teleop::harness::{
    compare_conditions, replay_metrics, run_resolved, ConditionSet, ConfigError, PairBy, RunLog, ScenarioConfig, SimError,
};
use twin_teleop::metrics::MetricsReport;
use twin_teleop::transport::{latency_report, udp::run_loopback};
use twin_teleop::Vec3;

const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "twin-teleop", version, about = "Bimanual teleoperation simulator and analysis tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its run log.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute trajectory metrics from a run log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        /// Anchor point `x,y,z` in mm; defaults to the one in the log header.
        #[arg(long, value_parser = parse_apex)]
        apex: Option<Vec3>,
        /// Print JSON instead of `key=value` lines.
        #[arg(long)]
        json: bool,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare metric reports or run logs between conditions.
    Compare {
        /// Baseline condition directory.
        #[arg(long)]
        a: PathBuf,
        /// Treatment condition directory.
        #[arg(long)]
        b: PathBuf,
        /// Further condition directories.
        #[arg(long = "cond")]
        more: Vec<PathBuf>,
        #[arg(long = "paired-by", value_enum, default_value = "seed")]
        paired_by: PairArg,
    },
    /// Report command latency and link health for a scenario's network.
    Netcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also send this many datagrams over a real loopback UDP socket.
        #[arg(long)]
        loopback: Option<u32>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PairArg {
    Seed,
    Index,
}

fn parse_apex(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Vec3::new(*x, *y, *z)),
        _ => Err("expected three finite numbers `x,y,z`".into()),
    }
}

enum Failure {
    Config(String),
    Violation(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(format!("config error: {e}"))
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            other => Failure::Violation(format!("runtime error: {other}")),
        }
    }
}

fn input(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn load(config: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let cfg = load(config, seed)?;
    let resolved = cfg.resolve()?;
    let run = run_resolved(&resolved)?;
    run.log.write(out).map_err(input)?;
    println!("log={}", out.display());
    println!("scenario={} seed={}", cfg.name, cfg.seed);
    println!("rows={} events={}", run.log.rows.len(), run.log.events.len());
    println!(
        "ticks={} max_force_n={:.6} max_step_n={:.6} violations={}",
        run.audit.ticks,
        run.audit.max_force,
        run.audit.max_step,
        run.audit.violations()
    );
    for (hand, s) in &run.hands {
        println!(
            "hand={} sent={} dropped={} accepted={} discarded={} safe_hold_entries={} ruptures={}",
            hand, s.sent, s.dropped, s.accepted, s.discarded, s.safe_hold_entries, s.ruptures
        );
    }
    if !run.audit.clean() {
        return Err(Failure::Violation(format!(
            "runtime violation: {} ({})",
            run.audit.violations(),
            run.audit.first_violation.clone().unwrap_or_default()
        )));
    }
    Ok(())
}

fn metrics(log: &Path, apex: Option<Vec3>, json: bool, out: Option<&Path>) -> Result<(), Failure> {
    let log = RunLog::read(log).map_err(input)?;
    let report = replay_metrics(&log, apex.as_ref()).map_err(input)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = out {
        fs::write(path, format!("{text}\n")).map_err(|e| input(format!("{}: {e}", path.display())))?;
    }
    if json {
        println!("{text}");
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

/// Reads every `*.json` report and `*.csv`/`*.log` run log in `dir`, in
/// file-name order.
fn read_condition(dir: &Path) -> Result<ConditionSet, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut reports = Vec::new();
    for f in files {
        let ext = f.extension().and_then(|e| e.to_str()).unwrap_or("");
        let report = match ext {
            "json" => {
                let text = fs::read_to_string(&f).map_err(|e| input(format!("{}: {e}", f.display())))?;
                serde_json::from_str::<MetricsReport>(&text).map_err(|e| input(format!("{}: {e}", f.display())))?
            }
            "csv" | "log" => {
                let log = RunLog::read(&f).map_err(input)?;
                replay_metrics(&log, None).map_err(|e| input(format!("{}: {e}", f.display())))?
            }
            _ => continue,
        };
        reports.push(report);
    }
    let label = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(ConditionSet { label, reports })
}

fn compare(dirs: &[PathBuf], pair: PairArg) -> Result<(), Failure> {
    let conds = dirs.iter().map(|d| read_condition(d)).collect::<Result<Vec<_>, _>>()?;
    let pair_by = match pair {
        PairArg::Seed => PairBy::Seed,
        PairArg::Index => PairBy::Index,
    };
    let table = compare_conditions(&conds, pair_by).map_err(input)?;
    print!("{}", table.to_text());
    Ok(())
}

fn netcheck(config: &Path, seed: Option<u64>, loopback: Option<u32>) -> Result<(), Failure> {
    let cfg = load(config, seed)?;
    let resolved = cfg.resolve()?;
    let run = run_resolved(&resolved)?;
    let report = latency_report(&run.latency, run.latency_budget_ms).map_err(|e| Failure::Violation(e.to_string()))?;
    print!("{}", report.to_text());
    for (hand, s) in &run.hands {
        println!(
            "hand={} sent={} dropped={} accepted={} discarded={} safe_hold_entries={}",
            hand, s.sent, s.dropped, s.accepted, s.discarded, s.safe_hold_entries
        );
    }
    let true_offset = cfg.net.clock_offset_us as f64;
    let worst = run
        .clock
        .iter()
        .map(|c| (c.offset_us - true_offset).abs() - c.rtt_us as f64 / 2.0)
        .fold(f64::NEG_INFINITY, f64::max);
    println!("clock_rounds={} clock_bound_ok={}", run.clock.len(), run.clock.is_empty() || worst <= 0.0);

    if let Some(n) = loopback {
        let snap = run_loopback(n, Duration::from_micros(11_111), None).map_err(|e| Failure::Violation(format!("loopback: {e}")))?;
        println!(
            "loopback_sent={n} loopback_accepted={} loopback_discarded={} loopback_malformed={}",
            snap.accepted, snap.discarded, snap.malformed
        );
        if let Ok(r) = latency_report(&snap.latencies, run.latency_budget_ms) {
            println!("loopback_max_ms={:.3} loopback_verdict={}", r.max_ms, if r.pass() { "pass" } else { "fail" });
        }
    }
    if !report.pass() {
        return Err(Failure::Violation(format!(
            "latency budget violated by {} of {} commands",
            report.violations.len(),
            report.count
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, seed, out } => simulate(config, *seed, out),
        Command::Metrics { log, apex, json, out } => metrics(log, *apex, *json, out.as_deref()),
        Command::Compare { a, b, more, paired_by } => {
            let mut dirs = vec![a.clone(), b.clone()];
            dirs.extend(more.iter().cloned());
            compare(&dirs, *paired_by)
        }
        Command::Netcheck { config, seed, loopback } => netcheck(config, *seed, *loopback),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VIOLATION)
        }
    }
}

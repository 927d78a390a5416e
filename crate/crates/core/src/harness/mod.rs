//! Scenario loading, closed-loop simulation, run logs and condition
//! comparison.

pub mod compare;
pub mod config;
pub mod runlog;
pub mod sim;
pub mod trajectory;

pub use compare::{compare_conditions, CompareError, CompareTable, ConditionSet, PairBy};
pub use config::{ConfigError, ResolvedScenario, ScenarioConfig};
pub use runlog::{replay_metrics, EventKind, LogEvent, RunLog, RunLogError};
pub use sim::{frame_time_us, run_resolved, run_scenario, ForceAudit, HandStats, RunOutput, SimError};

use std::path::PathBuf;

/// Directory holding the bundled reference scenarios.
pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Loads a bundled scenario by name (`brain_trace`, `tumor_resect`).
pub fn bundled_scenario(name: &str) -> Result<ScenarioConfig, ConfigError> {
    ScenarioConfig::load(&scenario_dir().join(format!("{name}.json")))
}

pub const BUNDLED_SCENARIOS: [&str; 2] = ["brain_trace", "tumor_resect"];

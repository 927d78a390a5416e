//! Condition comparison: Friedman omnibus over every task/condition column,
//! Wilcoxon follow-ups of each condition against the first, Holm-adjusted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::metrics::MetricsReport;
use crate::stats::{friedman, holm_correct, signed_ranks, wilcoxon_signed_rank, ConditionMatrix, StatsError, TestResult};

/// Significance level for the direction column.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("unpaired input: {0}")]
    UnpairedInput(String),
}

/// How reports are matched across conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairBy {
    /// By the seed recorded in each report.
    #[default]
    Seed,
    /// By position within each task, in the order given.
    Index,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSet {
    pub label: String,
    pub reports: Vec<MetricsReport>,
}

/// One condition-vs-baseline follow-up for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowUp {
    pub task: String,
    pub condition: String,
    pub z: f64,
    pub p: f64,
    pub p_holm: f64,
    pub n: usize,
    pub direction: String,
    pub signed_ranks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub friedman: Option<TestResult>,
    pub follow_ups: Vec<FollowUp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub baseline: String,
    pub conditions: Vec<String>,
    pub tasks: Vec<String>,
    pub rows: Vec<MetricRow>,
    pub notes: Vec<String>,
}

type Keyed = BTreeMap<(usize, String), BTreeMap<u64, MetricsReport>>;

fn key_reports(conds: &[ConditionSet], pair_by: PairBy) -> Result<Keyed, CompareError> {
    let mut out: Keyed = BTreeMap::new();
    for (ci, c) in conds.iter().enumerate() {
        let mut counters: BTreeMap<String, u64> = BTreeMap::new();
        for r in &c.reports {
            let key = match pair_by {
                PairBy::Seed => r.seed.ok_or_else(|| {
                    CompareError::UnpairedInput(format!("report for `{}` in `{}` has no seed", r.scenario, c.label))
                })?,
                PairBy::Index => {
                    let n = counters.entry(r.scenario.clone()).or_default();
                    *n += 1;
                    *n - 1
                }
            };
            let slot = out.entry((ci, r.scenario.clone())).or_default();
            if slot.insert(key, r.clone()).is_some() {
                return Err(CompareError::UnpairedInput(format!(
                    "duplicate subject {key} for `{}` in `{}`",
                    r.scenario, c.label
                )));
            }
        }
    }
    Ok(out)
}

fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn metric_of(r: &MetricsReport, name: &str) -> Option<f64> {
    r.scalar_metrics().into_iter().find(|(k, _)| *k == name).map(|(_, v)| v)
}

pub fn compare_conditions(conds: &[ConditionSet], pair_by: PairBy) -> Result<CompareTable, CompareError> {
    if conds.len() < 2 {
        return Err(CompareError::UnpairedInput("need at least two conditions".into()));
    }
    let keyed = key_reports(conds, pair_by)?;
    let tasks: Vec<String> = keyed.keys().map(|(_, t)| t.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if tasks.is_empty() {
        return Err(CompareError::UnpairedInput("no reports".into()));
    }
    let empty = BTreeMap::new();
    for task in &tasks {
        let base: BTreeSet<u64> = keyed.get(&(0, task.clone())).unwrap_or(&empty).keys().copied().collect();
        for (ci, c) in conds.iter().enumerate().skip(1) {
            let other: BTreeSet<u64> = keyed.get(&(ci, task.clone())).unwrap_or(&empty).keys().copied().collect();
            if other != base {
                return Err(CompareError::UnpairedInput(format!(
                    "task `{task}`: subjects of `{}` do not match `{}`",
                    c.label, conds[0].label
                )));
            }
        }
    }

    // Metrics present in every report.
    let all: Vec<&MetricsReport> = keyed.values().flat_map(|m| m.values()).collect();
    let metrics: Vec<&'static str> = all[0]
        .scalar_metrics()
        .into_iter()
        .map(|(k, _)| k)
        .filter(|k| all.iter().all(|r| metric_of(r, k).is_some()))
        .collect();

    let subjects_of = |ci: usize, task: &str| keyed.get(&(ci, task.to_owned())).unwrap_or(&empty);
    let common: BTreeSet<u64> = tasks
        .iter()
        .map(|t| subjects_of(0, t).keys().copied().collect::<BTreeSet<_>>())
        .reduce(|a, b| a.intersection(&b).copied().collect())
        .unwrap_or_default();
    let columns: Vec<(usize, &String)> = tasks.iter().flat_map(|t| (0..conds.len()).map(move |ci| (ci, t))).collect();

    let mut rows = Vec::new();
    for metric in &metrics {
        let friedman_result = if columns.len() >= 3 && common.len() >= 2 {
            let values: Vec<Vec<f64>> = common
                .iter()
                .map(|s| {
                    columns
                        .iter()
                        .map(|(ci, t)| metric_of(&subjects_of(*ci, t)[s], metric).expect("metric present"))
                        .collect()
                })
                .collect();
            ConditionMatrix::new(values).ok().and_then(|m| friedman(&m).ok())
        } else {
            None
        };

        let mut follow_ups = Vec::new();
        for task in &tasks {
            for (ci, c) in conds.iter().enumerate().skip(1) {
                let base = subjects_of(0, task);
                let other = subjects_of(ci, task);
                let pairs: Vec<(f64, f64)> = base
                    .iter()
                    .map(|(s, a)| {
                        let b = &other[s];
                        (metric_of(b, metric).expect("metric present"), metric_of(a, metric).expect("metric present"))
                    })
                    .collect();
                let (z, p, n) = match wilcoxon_signed_rank(&pairs) {
                    Ok(r) => (r.statistic, r.p, r.n),
                    Err(StatsError::AllZeroDifferences) => (0.0, 1.0, 0),
                    Err(StatsError::DegenerateInput(_)) => (0.0, 1.0, 0),
                };
                let mut diffs: Vec<f64> = pairs.iter().map(|(b, a)| b - a).collect();
                let med = median(&mut diffs);
                follow_ups.push(FollowUp {
                    task: task.clone(),
                    condition: c.label.clone(),
                    z,
                    p,
                    p_holm: p,
                    n,
                    direction: if med > 0.0 {
                        "Increase".into()
                    } else if med < 0.0 {
                        "Decrease".into()
                    } else {
                        "No change".into()
                    },
                    signed_ranks: signed_ranks(&pairs),
                });
            }
        }
        let adjusted = holm_correct(&follow_ups.iter().map(|f| f.p).collect::<Vec<_>>());
        for (f, adj) in follow_ups.iter_mut().zip(adjusted) {
            f.p_holm = adj;
            if f.direction != "No change" && adj >= ALPHA {
                f.direction.push_str(" (n.s.)");
            }
        }
        rows.push(MetricRow {
            metric: metric.to_string(),
            friedman: friedman_result,
            follow_ups,
        });
    }

    let notes = rank_pattern_notes(&rows);
    Ok(CompareTable {
        baseline: conds[0].label.clone(),
        conditions: conds.iter().map(|c| c.label.clone()).collect(),
        tasks,
        rows,
        notes,
    })
}

/// Notes for metrics whose follow-ups share identical signed-rank vectors,
/// which yields identical test statistics.
fn rank_pattern_notes(rows: &[MetricRow]) -> Vec<String> {
    let mut notes = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            for (fa, fb) in a.follow_ups.iter().zip(&b.follow_ups) {
                if !fa.signed_ranks.is_empty() && fa.signed_ranks == fb.signed_ranks {
                    notes.push(format!(
                        "{} and {} share identical signed-rank outcomes in {} ({} vs baseline), reflecting matching within-subject rank patterns",
                        a.metric, b.metric, fa.task, fa.condition
                    ));
                }
            }
        }
    }
    notes
}

impl CompareTable {
    pub fn row(&self, metric: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "conditions: {} (baseline {}); tasks: {}",
            self.conditions.join(", "),
            self.baseline,
            self.tasks.join(", ")
        );
        let _ = write!(s, "{:<20} {:<24}", "metric", "friedman");
        let heads: Vec<String> = self.rows.first().map_or(Vec::new(), |r| {
            r.follow_ups.iter().map(|f| format!("{} [{}]", f.task, f.condition)).collect()
        });
        for h in &heads {
            let _ = write!(s, " | {h:<48}");
        }
        s.push('\n');
        for row in &self.rows {
            let fr = row.friedman.map_or("-".to_owned(), |f| {
                format!("chi2({})={:.2} p={:.4}", f.df.unwrap_or(0.0), f.statistic, f.p)
            });
            let _ = write!(s, "{:<20} {:<24}", row.metric, fr);
            for f in &row.follow_ups {
                let cell = format!("Z={:.2} p={:.4} holm={:.4} {}", f.z, f.p, f.p_holm, f.direction);
                let _ = write!(s, " | {cell:<48}");
            }
            s.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

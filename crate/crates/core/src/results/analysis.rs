//! Speedup and cross-build change detection over time-like metrics
//! (lower is better).

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::{BuildSeries, ResultTable};
use crate::planner::ScalePoint;

pub const DEFAULT_REGRESSION_THRESHOLD_PCT: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("baseline {point} has no value for {metric}")]
    MissingBaseline { point: ScalePoint, metric: String },
    #[error("{point} has no value for {metric}")]
    MissingMetric { point: ScalePoint, metric: String },
    #[error("{metric} at {point} is {value}, expected > 0")]
    NonpositiveValue {
        point: ScalePoint,
        metric: String,
        value: f64,
    },
    #[error("need at least two builds with {metric} at {point}, found {found}")]
    InsufficientHistory {
        point: ScalePoint,
        metric: String,
        found: usize,
    },
    #[error("threshold must be a non-negative number")]
    BadThreshold,
}

fn positive(point: ScalePoint, metric: &str, value: f64) -> Result<f64, AnalysisError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(AnalysisError::NonpositiveValue {
            point,
            metric: metric.into(),
            value,
        })
    }
}

/// `value(baseline) / value(point)` for every point in `table`, in
/// canonical order. The baseline itself gets exactly 1.0.
pub fn compute_speedup(
    table: &ResultTable,
    metric: &str,
    baseline: ScalePoint,
) -> Result<Vec<(ScalePoint, f64)>, AnalysisError> {
    speedup_over(table, metric, baseline, &table.points())
}

fn speedup_over(
    table: &ResultTable,
    metric: &str,
    baseline: ScalePoint,
    points: &[ScalePoint],
) -> Result<Vec<(ScalePoint, f64)>, AnalysisError> {
    let base = table
        .value(baseline, metric)
        .ok_or_else(|| AnalysisError::MissingBaseline {
            point: baseline,
            metric: metric.into(),
        })?;
    let base = positive(baseline, metric, base)?;
    points
        .iter()
        .map(|&p| {
            let v = table
                .value(p, metric)
                .ok_or_else(|| AnalysisError::MissingMetric {
                    point: p,
                    metric: metric.into(),
                })?;
            let v = positive(p, metric, v)?;
            Ok((p, base / v))
        })
        .collect()
}

/// Smallest-total-process point with `nodes` nodes that reports `metric`.
pub fn default_baseline(table: &ResultTable, nodes: u32, metric: &str) -> Option<ScalePoint> {
    table
        .rows()
        .iter()
        .filter(|r| r.point.nodes() == nodes && r.metric == metric)
        .map(|r| r.point)
        .min()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeGroupSpeedup {
    pub nodes: u32,
    pub baseline: ScalePoint,
    /// `(point, speedup)` for every point with this node count.
    pub entries: Vec<(ScalePoint, f64)>,
}

impl NodeGroupSpeedup {
    /// Smallest and largest speedup over points other than the baseline.
    pub fn range(&self) -> Option<(f64, f64)> {
        let vals = self
            .entries
            .iter()
            .filter(|(p, _)| *p != self.baseline)
            .map(|&(_, s)| s);
        vals.fold(None, |acc, s| match acc {
            None => Some((s, s)),
            Some((lo, hi)) => Some((lo.min(s), hi.max(s))),
        })
    }
}

/// Speedups grouped by node count. Each group is measured against
/// `baseline` when given, otherwise against its own [`default_baseline`].
pub fn speedup_by_nodes(
    table: &ResultTable,
    metric: &str,
    baseline: Option<ScalePoint>,
) -> Result<Vec<NodeGroupSpeedup>, AnalysisError> {
    let mut groups: BTreeMap<u32, Vec<ScalePoint>> = BTreeMap::new();
    for r in table.rows().iter().filter(|r| r.metric == metric) {
        groups.entry(r.point.nodes()).or_default().push(r.point);
    }
    groups
        .into_iter()
        .map(|(nodes, mut points)| {
            points.sort();
            points.dedup();
            let base = baseline.unwrap_or(points[0]);
            let entries = speedup_over(table, metric, base, &points)?;
            Ok(NodeGroupSpeedup {
                nodes,
                baseline: base,
                entries,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Improvement,
    Degradation,
}

/// A flagged change between two consecutive builds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub from_build: String,
    pub to_build: String,
    pub from_commit: String,
    pub to_commit: String,
    pub from_value: f64,
    pub to_value: f64,
    /// Signed relative change, `(to - from) / from * 100`.
    pub change_pct: f64,
    pub kind: ChangeKind,
}

/// Flags every consecutive pair of builds (among those reporting `metric`
/// at `point`) whose relative change exceeds `threshold_pct`.
pub fn detect_regressions(
    series: &BuildSeries,
    metric: &str,
    point: ScalePoint,
    threshold_pct: f64,
) -> Result<Vec<Transition>, AnalysisError> {
    if !(threshold_pct >= 0.0 && threshold_pct.is_finite()) {
        return Err(AnalysisError::BadThreshold);
    }
    let history: Vec<_> = series
        .entries()
        .iter()
        .filter_map(|e| e.table.value(point, metric).map(|v| (e, v)))
        .collect();
    if history.len() < 2 {
        return Err(AnalysisError::InsufficientHistory {
            point,
            metric: metric.into(),
            found: history.len(),
        });
    }
    let mut flagged = Vec::new();
    for pair in history.windows(2) {
        let (prev, a) = pair[0];
        let (next, b) = pair[1];
        let a = positive(point, metric, a)?;
        let change_pct = (b - a) / a * 100.0;
        if change_pct.abs() > threshold_pct {
            flagged.push(Transition {
                from_build: prev.build_num.clone(),
                to_build: next.build_num.clone(),
                from_commit: prev.commit_id.clone(),
                to_commit: next.commit_id.clone(),
                from_value: a,
                to_value: b,
                change_pct,
                kind: if b < a {
                    ChangeKind::Improvement
                } else {
                    ChangeKind::Degradation
                },
            });
        }
    }
    Ok(flagged)
}

//! Expansion of scalability ranges into an ordered run matrix.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::config::{IntRange, ScalabilitySpec, ScalingMode};

/// Default cap on the number of points a single job may contain.
pub const DEFAULT_MATRIX_CAP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("invalid range [{lo}, {hi}]: {reason}")]
    Range { lo: u32, hi: u32, reason: String },
    #[error("run matrix has {points} points, over the cap of {cap}")]
    MatrixTooLarge { points: usize, cap: usize },
    #[error("run matrix is empty")]
    EmptyMatrix,
}

/// One (nodes, processes-per-node) configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ScalePoint {
    nodes: u32,
    procs_per_node: u32,
}

impl ScalePoint {
    /// Returns `None` when either count is zero.
    pub fn new(nodes: u32, procs_per_node: u32) -> Option<Self> {
        if nodes == 0 || procs_per_node == 0 {
            return None;
        }
        Some(Self {
            nodes,
            procs_per_node,
        })
    }

    pub fn nodes(&self) -> u32 {
        self.nodes
    }

    pub fn procs_per_node(&self) -> u32 {
        self.procs_per_node
    }

    pub fn total_procs(&self) -> u64 {
        u64::from(self.nodes) * u64::from(self.procs_per_node)
    }

    /// Matrix ordering key: ascending total processes, then nodes.
    pub fn order_key(&self) -> (u64, u32) {
        (self.total_procs(), self.nodes)
    }

    /// File stem used for captured output, e.g. `2x8`.
    pub fn label(&self) -> String {
        format!("{}x{}", self.nodes, self.procs_per_node)
    }
}

impl PartialOrd for ScalePoint {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScalePoint {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.total_procs(), self.nodes, self.procs_per_node).cmp(&(
            other.total_procs(),
            other.nodes,
            other.procs_per_node,
        ))
    }
}

impl fmt::Display for ScalePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.nodes, self.procs_per_node)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("expected <nodes>x<procs_per_node> with both counts >= 1, got {0:?}")]
pub struct ParsePointError(String);

impl FromStr for ScalePoint {
    type Err = ParsePointError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParsePointError(s.to_string());
        let (n, p) = s.split_once(['x', 'X']).ok_or_else(err)?;
        let n: u32 = n.trim().parse().map_err(|_| err())?;
        let p: u32 = p.trim().parse().map_err(|_| err())?;
        ScalePoint::new(n, p).ok_or_else(err)
    }
}

/// Ordered, deduplicated scale points plus the node count to provision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunMatrix {
    points: Vec<ScalePoint>,
    max_nodes: u32,
}

impl RunMatrix {
    /// Builds a matrix from arbitrary points, sorting and deduplicating them.
    pub fn from_points(points: impl IntoIterator<Item = ScalePoint>) -> Result<Self, PlanError> {
        let mut points: Vec<ScalePoint> = points.into_iter().collect();
        points.sort();
        points.dedup();
        let max_nodes = points
            .iter()
            .map(ScalePoint::nodes)
            .max()
            .ok_or(PlanError::EmptyMatrix)?;
        Ok(Self { points, max_nodes })
    }

    pub fn points(&self) -> &[ScalePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_nodes(&self) -> u32 {
        self.max_nodes
    }

    /// Plain-text table for CI logs.
    pub fn to_table(&self) -> String {
        let mut out = String::from("  #  nodes  ppn  total_procs\n");
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&format!(
                "{:>3}  {:>5}  {:>3}  {:>11}\n",
                i + 1,
                p.nodes(),
                p.procs_per_node(),
                p.total_procs()
            ));
        }
        out.push_str(&format!(
            "{} points, provisioning {} node(s)\n",
            self.points.len(),
            self.max_nodes
        ));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "max_nodes": self.max_nodes,
            "points": self.points.iter().map(|p| serde_json::json!({
                "nodes": p.nodes(),
                "procs_per_node": p.procs_per_node(),
                "total_procs": p.total_procs(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Expands one inclusive range into a strictly increasing list of values.
///
/// Linear mode steps from `lo` by `step`; log2 mode doubles from `lo`. In
/// both modes `hi` is appended when the stepping does not land on it.
pub fn expand_axis(range: IntRange, mode: ScalingMode) -> Result<Vec<u32>, PlanError> {
    let (lo, hi) = (range.min, range.max);
    if lo < 1 || lo > hi {
        return Err(PlanError::Range {
            lo,
            hi,
            reason: "need 1 <= lo <= hi".into(),
        });
    }
    let mut out = Vec::new();
    let mut v = lo;
    loop {
        out.push(v);
        let next = match mode {
            ScalingMode::Linear { step } => {
                if step == 0 {
                    return Err(PlanError::Range {
                        lo,
                        hi,
                        reason: "linear step must be >= 1".into(),
                    });
                }
                v.checked_add(step)
            }
            ScalingMode::Log2 => v.checked_mul(2),
        };
        match next {
            Some(n) if n <= hi => v = n,
            _ => break,
        }
    }
    if *out.last().expect("at least lo") != hi {
        out.push(hi);
    }
    Ok(out)
}

/// Expands both axes with the default point cap.
pub fn expand_matrix(spec: &ScalabilitySpec) -> Result<RunMatrix, PlanError> {
    expand_matrix_with_cap(spec, DEFAULT_MATRIX_CAP)
}

pub fn expand_matrix_with_cap(spec: &ScalabilitySpec, cap: usize) -> Result<RunMatrix, PlanError> {
    let nodes = expand_axis(spec.num_of_nodes, spec.mode)?;
    let ppn = expand_axis(spec.proc_per_node, spec.mode)?;
    let product = nodes.len().saturating_mul(ppn.len());
    if product > cap {
        return Err(PlanError::MatrixTooLarge {
            points: product,
            cap,
        });
    }
    let points = nodes.iter().flat_map(|&n| {
        ppn.iter()
            .map(move |&p| ScalePoint::new(n, p).expect("axis values are >= 1"))
    });
    RunMatrix::from_points(points)
}

pub fn required_nodes(matrix: &RunMatrix) -> Result<u32, PlanError> {
    if matrix.is_empty() {
        return Err(PlanError::EmptyMatrix);
    }
    Ok(matrix.max_nodes())
}

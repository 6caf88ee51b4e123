//! Result tables, the build-numbered CSV, and their analysis.
//!
//! The CSV is fixed to the header `nodes,procs_per_node,total_procs,metric,value`
//! with LF line endings and rows sorted by `(total_procs, nodes, metric)`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::planner::ScalePoint;

pub mod analysis;
pub mod parser;
pub mod series;

pub use analysis::{
    compute_speedup, default_baseline, detect_regressions, speedup_by_nodes, AnalysisError,
    ChangeKind, NodeGroupSpeedup, Transition, DEFAULT_REGRESSION_THRESHOLD_PCT,
};
pub use parser::{invoke_parser, parse_key_value_dir};
pub use series::{load_series, BuildEntry, BuildSeries, CommitResolver, GitCommitResolver};

pub const CSV_HEADER: &str = "nodes,procs_per_node,total_procs,metric,value";
pub const RESULT_FILE_PREFIX: &str = "scalability_test_result_";
pub const RESULT_FILE_SUFFIX: &str = ".csv";

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("parser exited with {exit_code}: {stderr}")]
    ParserFailure { exit_code: i32, stderr: String },
    #[error("parser output malformed: {0}")]
    ParserOutputMalformed(String),
    #[error("no run output files in {0}")]
    EmptyOutputDir(PathBuf),
    #[error("invalid result table: {0}")]
    InvalidTable(String),
    #[error("invalid build number {0:?}")]
    InvalidBuildNum(String),
    #[error("{0}")]
    IoFailure(#[from] std::io::Error),
}

/// One metric observed at one scale point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub point: ScalePoint,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(point: ScalePoint, metric: impl Into<String>, value: f64) -> Self {
        Self {
            point,
            metric: metric.into(),
            value,
        }
    }

    fn sort_key(&self) -> (u64, u32, &str) {
        (
            self.point.total_procs(),
            self.point.nodes(),
            self.metric.as_str(),
        )
    }
}

/// Metric names become CSV cells; they must be nonempty, free of control
/// characters, and carry no surrounding whitespace.
pub fn valid_metric_name(name: &str) -> bool {
    !name.is_empty() && name.trim() == name && !name.chars().any(char::is_control)
}

/// Build identifiers end up in file names.
pub fn valid_build_num(build: &str) -> bool {
    !build.is_empty()
        && build
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '+'))
        && build != "."
        && build != ".."
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    build_num: String,
    rows: Vec<MetricRow>,
}

impl ResultTable {
    /// Validates rows and stores them in canonical order.
    pub fn new(
        build_num: impl Into<String>,
        mut rows: Vec<MetricRow>,
    ) -> Result<Self, ResultsError> {
        let build_num = build_num.into();
        if !valid_build_num(&build_num) {
            return Err(ResultsError::InvalidBuildNum(build_num));
        }
        let mut seen = HashSet::new();
        for r in &rows {
            if !valid_metric_name(&r.metric) {
                return Err(ResultsError::InvalidTable(format!(
                    "bad metric name {:?}",
                    r.metric
                )));
            }
            if !r.value.is_finite() {
                return Err(ResultsError::InvalidTable(format!(
                    "non-finite value for {} at {}",
                    r.metric, r.point
                )));
            }
            if !seen.insert((r.point, r.metric.as_str())) {
                return Err(ResultsError::InvalidTable(format!(
                    "duplicate metric {} at {}",
                    r.metric, r.point
                )));
            }
        }
        rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Ok(Self { build_num, rows })
    }

    pub fn build_num(&self) -> &str {
        &self.build_num
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn value(&self, point: ScalePoint, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.point == point && r.metric == metric)
            .map(|r| r.value)
    }

    /// Distinct points in canonical order.
    pub fn points(&self) -> Vec<ScalePoint> {
        let mut pts: Vec<ScalePoint> = self.rows.iter().map(|r| r.point).collect();
        pts.sort();
        pts.dedup();
        pts
    }

    pub fn metrics(&self) -> Vec<&str> {
        let mut m: Vec<&str> = self.rows.iter().map(|r| r.metric.as_str()).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    pub fn with_build_num(self, build_num: impl Into<String>) -> Result<Self, ResultsError> {
        Self::new(build_num, self.rows)
    }

    /// Canonical CSV text.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(CSV_HEADER.split(','))
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.point.nodes().to_string(),
                r.point.procs_per_node().to_string(),
                r.point.total_procs().to_string(),
                r.metric.clone(),
                format_value(r.value),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// Parses CSV text in the result schema.
    pub fn from_csv(build_num: impl Into<String>, text: &str) -> Result<Self, ResultsError> {
        let bad = |m: String| ResultsError::ParserOutputMalformed(m);
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?;
        let header: Vec<&str> = header.iter().collect();
        if header.join(",") != CSV_HEADER {
            return Err(bad(format!(
                "expected header {CSV_HEADER:?}, got {:?}",
                header.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| bad(format!("line {line}: {e}")))?;
            if rec.len() != 5 {
                return Err(bad(format!("line {line}: expected 5 fields")));
            }
            let int = |j: usize| -> Result<u64, ResultsError> {
                rec[j]
                    .parse::<u64>()
                    .map_err(|_| bad(format!("line {line}: bad integer {:?}", &rec[j])))
            };
            let nodes = u32::try_from(int(0)?)
                .map_err(|_| bad(format!("line {line}: nodes out of range")))?;
            let ppn = u32::try_from(int(1)?)
                .map_err(|_| bad(format!("line {line}: ppn out of range")))?;
            let total = int(2)?;
            let point = ScalePoint::new(nodes, ppn)
                .ok_or_else(|| bad(format!("line {line}: counts must be >= 1")))?;
            if point.total_procs() != total {
                return Err(bad(format!(
                    "line {line}: total_procs {total} != {nodes} x {ppn}"
                )));
            }
            let value: f64 = rec[4]
                .parse()
                .map_err(|_| bad(format!("line {line}: bad value {:?}", &rec[4])))?;
            rows.push(MetricRow::new(point, &rec[3], value));
        }
        Self::new(build_num, rows).map_err(|e| match e {
            ResultsError::InvalidTable(m) => bad(m),
            other => other,
        })
    }
}

/// Shortest decimal text that reads back to the same `f64`; never uses an
/// exponent.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

pub fn result_file_name(build_num: &str) -> String {
    format!("{RESULT_FILE_PREFIX}{build_num}{RESULT_FILE_SUFFIX}")
}

/// Extracts the build number from a result file name.
pub fn build_num_from_file_name(name: &str) -> Option<&str> {
    name.strip_prefix(RESULT_FILE_PREFIX)?
        .strip_suffix(RESULT_FILE_SUFFIX)
        .filter(|b| valid_build_num(b))
}

/// Writes `scalability_test_result_<build_num>.csv` into `dest_dir`.
pub fn write_result_csv(table: &ResultTable, dest_dir: &Path) -> Result<PathBuf, ResultsError> {
    std::fs::create_dir_all(dest_dir)?;
    let path = dest_dir.join(result_file_name(table.build_num()));
    std::fs::write(&path, table.to_csv())?;
    Ok(path)
}

pub fn read_result_csv(path: &Path) -> Result<ResultTable, ResultsError> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let build = build_num_from_file_name(name)
        .ok_or_else(|| ResultsError::InvalidBuildNum(name.to_string()))?;
    let text = std::fs::read_to_string(path)?;
    ResultTable::from_csv(build, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(n: u32, p: u32) -> ScalePoint {
        ScalePoint::new(n, p).unwrap()
    }

    #[test]
    fn single_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let t = ResultTable::new("417", vec![MetricRow::new(pt(1, 2), "elapsed", 12.5)]).unwrap();
        let path = write_result_csv(&t, dir.path()).unwrap();
        assert_eq!(path.file_name().unwrap(), "scalability_test_result_417.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "nodes,procs_per_node,total_procs,metric,value\n1,2,2,elapsed,12.5\n"
        );
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn writing_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let t = ResultTable::new(
            "9",
            vec![
                MetricRow::new(pt(2, 1), "elapsed", 3.25),
                MetricRow::new(pt(1, 1), "elapsed", 6.5),
            ],
        )
        .unwrap();
        let a = std::fs::read(write_result_csv(&t, dir.path()).unwrap()).unwrap();
        let b = std::fs::read(write_result_csv(&t, dir.path()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unsorted_rows_match_golden() {
        let t = ResultTable::new(
            "12",
            vec![
                MetricRow::new(pt(2, 4), "elapsed", 4.0),
                MetricRow::new(pt(1, 8), "mem_mb", 512.0),
                MetricRow::new(pt(1, 1), "elapsed", 31.0),
                MetricRow::new(pt(1, 8), "elapsed", 4.5),
                MetricRow::new(pt(8, 1), "elapsed", 5.0),
                MetricRow::new(pt(1, 2), "elapsed", 16.125),
            ],
        )
        .unwrap();
        let golden = include_str!("../../tests/fixtures/golden/unsorted_rows.csv");
        assert_eq!(t.to_csv(), golden);
    }

    #[test]
    fn quoting_for_unusual_metric_names() {
        let t =
            ResultTable::new("1", vec![MetricRow::new(pt(1, 1), "time,total \"s\"", 1.0)]).unwrap();
        let csv = t.to_csv();
        assert!(csv.contains("\"time,total \"\"s\"\"\""));
        assert_eq!(ResultTable::from_csv("1", &csv).unwrap(), t);
    }

    #[test]
    fn rejects_invalid_tables() {
        let dup = ResultTable::new(
            "1",
            vec![
                MetricRow::new(pt(1, 1), "e", 1.0),
                MetricRow::new(pt(1, 1), "e", 2.0),
            ],
        );
        assert!(matches!(dup, Err(ResultsError::InvalidTable(_))));
        let nan = ResultTable::new("1", vec![MetricRow::new(pt(1, 1), "e", f64::NAN)]);
        assert!(matches!(nan, Err(ResultsError::InvalidTable(_))));
        assert!(matches!(
            ResultTable::new("../x", vec![]),
            Err(ResultsError::InvalidBuildNum(_))
        ));
        assert!(matches!(
            ResultTable::new("1", vec![MetricRow::new(pt(1, 1), " e", 1.0)]),
            Err(ResultsError::InvalidTable(_))
        ));
    }

    #[test]
    fn rejects_malformed_csv() {
        let cases = [
            "nodes,ppn,total,metric,value\n1,1,1,e,1\n",
            "nodes,procs_per_node,total_procs,metric,value\n1,2,3,e,1\n",
            "nodes,procs_per_node,total_procs,metric,value\n0,2,0,e,1\n",
            "nodes,procs_per_node,total_procs,metric,value\n1,1,1,e,fast\n",
            "nodes,procs_per_node,total_procs,metric,value\n1,1,1,e\n",
        ];
        for c in cases {
            assert!(
                matches!(
                    ResultTable::from_csv("1", c),
                    Err(ResultsError::ParserOutputMalformed(_))
                ),
                "{c}"
            );
        }
    }

    #[test]
    fn file_name_round_trip() {
        assert_eq!(
            build_num_from_file_name("scalability_test_result_417.csv"),
            Some("417")
        );
        assert_eq!(
            build_num_from_file_name("scalability_test_result_.csv"),
            None
        );
        assert_eq!(build_num_from_file_name("other_417.csv"), None);
    }
}

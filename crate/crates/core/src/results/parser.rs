//! Output parsers: the external parser handshake and the built-in
//! `key=value` parser.
//!
//! An external parser is run once as `<parser> <output_dir>` and must print
//! a result CSV on stdout and exit 0.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use super::{MetricRow, ResultTable, ResultsError};
use crate::planner::ScalePoint;

const STDERR_LIMIT: usize = 4096;

/// Run output files (`<nodes>x<ppn>.out`) in `dir`, sorted by path.
pub fn run_output_files(dir: &Path) -> Result<Vec<(ScalePoint, PathBuf)>, ResultsError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() || path.extension().is_none_or(|e| e != "out") {
            continue;
        }
        let point = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<ScalePoint>().ok());
        if let Some(point) = point {
            out.push((point, path));
        }
    }
    out.sort();
    Ok(out)
}

pub fn invoke_parser(
    parser_cmd: &Path,
    output_dir: &Path,
    build_num: &str,
) -> Result<ResultTable, ResultsError> {
    if run_output_files(output_dir)?.is_empty() {
        return Err(ResultsError::EmptyOutputDir(output_dir.to_path_buf()));
    }
    let out = Command::new(parser_cmd)
        .arg(output_dir)
        .stdin(Stdio::null())
        .output()
        .map_err(|e| ResultsError::ParserFailure {
            exit_code: -1,
            stderr: format!("cannot run {}: {e}", parser_cmd.display()),
        })?;
    if !out.status.success() {
        let mut stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        if stderr.len() > STDERR_LIMIT {
            let mut cut = STDERR_LIMIT;
            while !stderr.is_char_boundary(cut) {
                cut -= 1;
            }
            stderr.truncate(cut);
        }
        return Err(ResultsError::ParserFailure {
            exit_code: out.status.code().unwrap_or(-1),
            stderr: stderr.trim_end().to_string(),
        });
    }
    let text = String::from_utf8(out.stdout)
        .map_err(|_| ResultsError::ParserOutputMalformed("stdout is not UTF-8".into()))?;
    let table = ResultTable::from_csv(build_num, &text)?;
    if table.is_empty() {
        return Err(ResultsError::ParserOutputMalformed("no rows".into()));
    }
    Ok(table)
}

/// Built-in parser: every `key=value` line with a finite numeric value in a
/// run output file becomes a metric for that file's scale point. Lines
/// starting with `#` are ignored. A key seen several times in one file
/// (repeated runs) reports the median.
pub fn parse_key_value_dir(
    output_dir: &Path,
    build_num: &str,
) -> Result<ResultTable, ResultsError> {
    let files = run_output_files(output_dir)?;
    if files.is_empty() {
        return Err(ResultsError::EmptyOutputDir(output_dir.to_path_buf()));
    }
    let mut rows = Vec::new();
    for (point, path) in files {
        let bytes = std::fs::read(&path)?;
        let text = String::from_utf8_lossy(&bytes);
        for (metric, values) in key_values(&text) {
            rows.push(MetricRow::new(point, metric, median(values)));
        }
    }
    ResultTable::new(build_num, rows)
}

fn key_values(text: &str) -> BTreeMap<String, Vec<f64>> {
    let mut found: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            continue;
        };
        let k = k.trim();
        if !super::valid_metric_name(k) || k.contains(char::is_whitespace) {
            continue;
        }
        if let Ok(x) = v.trim().parse::<f64>() {
            if x.is_finite() {
                found.entry(k.to_string()).or_default().push(x);
            }
        }
    }
    found
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

//! Build series: result tables ordered by build number.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;
use std::process::Command;

use super::{build_num_from_file_name, read_result_csv, ResultTable, ResultsError};

#[derive(Debug, Clone, PartialEq)]
pub struct BuildEntry {
    pub build_num: String,
    pub commit_id: String,
    pub table: ResultTable,
}

/// Numeric build numbers compare numerically and sort before any
/// non-numeric ones, which compare as strings.
pub fn compare_builds(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Entries in strictly increasing build order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildSeries {
    entries: Vec<BuildEntry>,
}

impl BuildSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry; its build must come after the last one.
    pub fn push(&mut self, entry: BuildEntry) -> Result<(), ResultsError> {
        if let Some(last) = self.entries.last() {
            if compare_builds(&last.build_num, &entry.build_num) != Ordering::Less {
                return Err(ResultsError::InvalidTable(format!(
                    "build {} does not follow build {}",
                    entry.build_num, last.build_num
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Sorts entries by build; duplicate builds are rejected.
    pub fn from_entries(mut entries: Vec<BuildEntry>) -> Result<Self, ResultsError> {
        entries.sort_by(|a, b| compare_builds(&a.build_num, &b.build_num));
        let mut s = Self::new();
        for e in entries {
            s.push(e)?;
        }
        Ok(s)
    }

    pub fn entries(&self) -> &[BuildEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latest(&self) -> Option<&BuildEntry> {
        self.entries.last()
    }
}

/// Maps a stored result file to the commit it belongs to.
pub trait CommitResolver {
    fn commit_for(&self, build_num: &str, path: &Path) -> Option<String>;
}

impl CommitResolver for HashMap<String, String> {
    fn commit_for(&self, build_num: &str, _path: &Path) -> Option<String> {
        self.get(build_num).cloned()
    }
}

/// Abbreviated id of the last commit touching the file, via `git log`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GitCommitResolver;

impl CommitResolver for GitCommitResolver {
    fn commit_for(&self, _build_num: &str, path: &Path) -> Option<String> {
        let dir = path.parent()?;
        let name = path.file_name()?;
        let out = Command::new("git")
            .arg("-C")
            .arg(dir)
            .args(["log", "-n", "1", "--format=%h", "--"])
            .arg(name)
            .output()
            .ok()?;
        let id = String::from_utf8_lossy(&out.stdout).trim().to_string();
        (out.status.success() && !id.is_empty()).then_some(id)
    }
}

pub const UNKNOWN_COMMIT: &str = "unknown";

/// Loads every `scalability_test_result_<build>.csv` in `dir`.
pub fn load_series(dir: &Path, commits: &dyn CommitResolver) -> Result<BuildSeries, ResultsError> {
    let mut entries = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(build) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(build_num_from_file_name)
            .map(str::to_string)
        else {
            continue;
        };
        let table = read_result_csv(&path)?;
        let commit_id = commits
            .commit_for(&build, &path)
            .unwrap_or_else(|| UNKNOWN_COMMIT.to_string());
        entries.push(BuildEntry {
            build_num: build,
            commit_id,
            table,
        });
    }
    BuildSeries::from_entries(entries)
}

// Flag large changes across stored builds.
//
// Writes a few result files the way `swarmci run` would, loads them back as
// a build series and reports every consecutive pair whose change is above
// the threshold.

use std::collections::HashMap;
use std::error::Error;

use swarmci::planner::ScalePoint;
use swarmci::results::{detect_regressions, load_series, write_result_csv, MetricRow, ResultTable};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let point: ScalePoint = "2x8".parse()?;
    let history = [
        ("101", "a1f3", 41.0),
        ("102", "9c0e", 40.2),
        ("103", "77d1", 43.9),
        ("104", "e5b2", 29.5),
        ("105", "0d4a", 30.1),
        ("106", "b3c9", 34.0),
    ];
    let mut commits = HashMap::new();
    for (build, commit, value) in history {
        let table = ResultTable::new(build, vec![MetricRow::new(point, "elapsed", value)])?;
        write_result_csv(&table, dir.path())?;
        commits.insert(build.to_string(), commit.to_string());
    }

    let series = load_series(dir.path(), &commits)?;
    for threshold in [10.0, 20.0] {
        println!("threshold {threshold}%:");
        for t in detect_regressions(&series, "elapsed", point, threshold)? {
            println!(
                "  {} -> {} ({} -> {}): {:+.1}% {:?}",
                t.from_build, t.to_build, t.from_commit, t.to_commit, t.change_pct, t.kind
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

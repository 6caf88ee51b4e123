//! Job driver: provision once, run the matrix in order, always tear down.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime};

use serde::Serialize;
use thiserror::Error;

use crate::backend::{
    Allocation, Backend, BackendError, CancelToken, Clock, LaunchRequest, LaunchResult,
    LAUNCH_FAILURE_EXIT_CODE,
};
use crate::config::TaskSpec;
use crate::planner::{self, PlanError, RunMatrix, ScalePoint};

/// Whole-job deadline used when none is given.
pub const DEFAULT_JOB_TIMEOUT: Duration = Duration::from_secs(120 * 60);
pub const STAGES_FILE: &str = "stages.json";

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("backend setup failed: {0}")]
    Install(#[source] BackendError),
    #[error("provisioning failed: {0}")]
    Provision(#[source] BackendError),
    #[error("output directory: {0}")]
    Io(#[from] std::io::Error),
    #[error("job timeout must be > 0")]
    ZeroTimeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailurePolicy {
    /// Record the failed point and keep going.
    #[default]
    Continue,
    /// Stop after the first failed point.
    FailFast,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub job_timeout: Duration,
    /// Per-point limit; defaults to `job_timeout / matrix size`.
    pub point_timeout: Option<Duration>,
    pub policy: FailurePolicy,
    /// Overrides the task's `repeats`.
    pub repeats: Option<u32>,
    /// Root under which `<task_name>/<nodes>x<ppn>.out` files go.
    pub output_root: PathBuf,
    pub env: Vec<(String, String)>,
    pub cancel: CancelToken,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            job_timeout: DEFAULT_JOB_TIMEOUT,
            point_timeout: None,
            policy: FailurePolicy::Continue,
            repeats: None,
            output_root: PathBuf::from("outputs"),
            env: Vec::new(),
            cancel: CancelToken::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub point: ScalePoint,
    pub result: LaunchResult,
    pub started_at: SystemTime,
    /// Set when the backend could not start the script.
    pub launch_error: Option<String>,
    /// Wall time of every repeat, in run order.
    pub repeat_times: Vec<Duration>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.launch_error.is_none() && self.result.succeeded()
    }
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub install_s: f64,
    pub provision_s: f64,
    pub execute_s: f64,
    pub collect_s: f64,
    pub publish_s: f64,
}

impl StageTimings {
    pub fn stages(&self) -> [(&'static str, f64); 5] {
        [
            ("install", self.install_s),
            ("provision", self.provision_s),
            ("execute", self.execute_s),
            ("collect", self.collect_s),
            ("publish", self.publish_s),
        ]
    }

    pub fn total_s(&self) -> f64 {
        self.stages().iter().map(|(_, s)| s).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    Completed,
    /// The job deadline passed; records are a prefix of the matrix.
    JobTimeout,
    FailFast {
        point: ScalePoint,
    },
    Cancelled,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Completed => f.write_str("completed"),
            Termination::JobTimeout => f.write_str("job timeout"),
            Termination::FailFast { point } => write!(f, "stopped after failure at {point}"),
            Termination::Cancelled => f.write_str("cancelled"),
        }
    }
}

#[derive(Debug)]
pub struct JobReport {
    pub records: Vec<RunRecord>,
    pub timings: StageTimings,
    pub termination: Termination,
    pub allocation: Allocation,
    pub output_dir: PathBuf,
    /// Teardown problems do not fail the job but are reported.
    pub teardown_error: Option<BackendError>,
}

impl JobReport {
    pub fn all_succeeded(&self) -> bool {
        self.termination == Termination::Completed && self.records.iter().all(RunRecord::succeeded)
    }

    pub fn failed_points(&self) -> Vec<ScalePoint> {
        self.records
            .iter()
            .filter(|r| !r.succeeded())
            .map(|r| r.point)
            .collect()
    }
}

/// Directory receiving a task's per-point output files.
pub fn task_output_dir(root: &Path, task_name: &str) -> PathBuf {
    root.join(task_name)
}

pub fn point_output_path(dir: &Path, point: ScalePoint) -> PathBuf {
    dir.join(format!("{}.out", point.label()))
}

fn clear_previous_outputs(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let stale = path.extension().is_some_and(|e| e == "out")
            || path.file_name().is_some_and(|n| n == STAGES_FILE);
        if stale && path.is_file() {
            std::fs::remove_file(path)?;
        }
    }
    Ok(())
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Runs a whole job on `backend`.
///
/// Provisions `required_nodes(matrix)` exactly once, runs every point in
/// matrix order, and tears the allocation down whatever happens after a
/// successful provision. Per-point outputs land in
/// `<output_root>/<task_name>/<nodes>x<ppn>.out`.
pub fn run_job(
    backend: &mut dyn Backend,
    spec: &TaskSpec,
    matrix: &RunMatrix,
    opts: &RunOptions,
) -> Result<JobReport, ExecError> {
    let node_count = planner::required_nodes(matrix)?;
    if opts.job_timeout.is_zero() {
        return Err(ExecError::ZeroTimeout);
    }
    let clock: Arc<dyn Clock> = backend.clock();
    let job_start = clock.now();
    let deadline = job_start + opts.job_timeout;
    let point_timeout = opts
        .point_timeout
        .unwrap_or_else(|| opts.job_timeout / matrix.len() as u32);
    let repeats = opts.repeats.unwrap_or(spec.scalability.repeats).max(1);

    let output_dir = task_output_dir(&opts.output_root, &spec.task_name);
    clear_previous_outputs(&output_dir)?;

    let mut timings = StageTimings::default();

    let t = clock.now();
    backend.prepare().map_err(ExecError::Install)?;
    timings.install_s = secs(clock.now() - t);

    let allocation = backend
        .provision(node_count)
        .map_err(ExecError::Provision)?;
    timings.provision_s = secs(allocation.provision_wall_time);
    log::info!(
        "provisioned {} node(s) as {} in {:.1}s",
        allocation.node_count(),
        allocation.alloc_id,
        timings.provision_s
    );

    let exec_start = clock.now();
    let (records, termination) = execute_points(
        backend,
        &allocation,
        spec,
        matrix,
        opts,
        &*clock,
        deadline,
        point_timeout,
        repeats,
        &output_dir,
    );
    timings.execute_s = secs(clock.now() - exec_start);

    let teardown_error = backend.teardown(&allocation).err();
    if let Some(e) = &teardown_error {
        log::warn!("teardown of {}: {e}", allocation.alloc_id);
    }

    Ok(JobReport {
        records,
        timings,
        termination,
        allocation,
        output_dir,
        teardown_error,
    })
}

#[allow(clippy::too_many_arguments)]
fn execute_points(
    backend: &mut dyn Backend,
    alloc: &Allocation,
    spec: &TaskSpec,
    matrix: &RunMatrix,
    opts: &RunOptions,
    clock: &dyn Clock,
    deadline: Duration,
    point_timeout: Duration,
    repeats: u32,
    output_dir: &Path,
) -> (Vec<RunRecord>, Termination) {
    let mut records = Vec::with_capacity(matrix.len());
    for &point in matrix.points() {
        if opts.cancel.is_cancelled() {
            return (records, Termination::Cancelled);
        }
        let started_at = SystemTime::now();
        let sink = point_output_path(output_dir, point);
        let mut runs: Vec<LaunchResult> = Vec::new();
        let mut launch_error = None;
        let mut hit_deadline = false;

        for rep in 0..repeats {
            let remaining = deadline.saturating_sub(clock.now());
            if remaining.is_zero() {
                hit_deadline = true;
                break;
            }
            let timeout = point_timeout.min(remaining);
            let mut req = LaunchRequest::new(point, &spec.scalability.script, &sink);
            req.timeout = timeout;
            req.append = rep > 0;
            req.cancel = Some(opts.cancel.clone());
            req.env.extend(opts.env.iter().cloned());
            req.env.insert("SWARM_TASK".into(), spec.task_name.clone());
            match backend.launch(alloc, &req) {
                Ok(r) => {
                    let failed = !r.succeeded();
                    if r.timed_out && timeout < point_timeout {
                        hit_deadline = true;
                    }
                    runs.push(r);
                    if failed {
                        break;
                    }
                }
                Err(e) => {
                    log::warn!("launch of {point} failed: {e}");
                    let msg = e.to_string();
                    let _ = std::fs::write(&sink, format!("# launch failed: {msg}\n"));
                    runs.push(LaunchResult {
                        exit_code: LAUNCH_FAILURE_EXIT_CODE,
                        wall_time: Duration::ZERO,
                        timed_out: false,
                        output_path: sink.clone(),
                    });
                    launch_error = Some(msg);
                    break;
                }
            }
            if hit_deadline || opts.cancel.is_cancelled() {
                break;
            }
        }

        if runs.is_empty() {
            // deadline passed before this point could start
            return (records, Termination::JobTimeout);
        }
        let repeat_times: Vec<Duration> = runs.iter().map(|r| r.wall_time).collect();
        let result = representative(runs);
        let record = RunRecord {
            point,
            result,
            started_at,
            launch_error,
            repeat_times,
        };
        let ok = record.succeeded();
        log::info!(
            "{point}: exit {} in {:.3}s{}",
            record.result.exit_code,
            record.result.wall_time.as_secs_f64(),
            if record.result.timed_out {
                " (timed out)"
            } else {
                ""
            }
        );
        records.push(record);

        if hit_deadline {
            return (records, Termination::JobTimeout);
        }
        if opts.cancel.is_cancelled() {
            return (records, Termination::Cancelled);
        }
        if !ok && opts.policy == FailurePolicy::FailFast {
            return (records, Termination::FailFast { point });
        }
    }
    (records, Termination::Completed)
}

/// The first failed run if any, otherwise the lower-median run by wall time.
fn representative(mut runs: Vec<LaunchResult>) -> LaunchResult {
    if let Some(i) = runs.iter().position(|r| !r.succeeded()) {
        return runs.swap_remove(i);
    }
    runs.sort_by_key(|r| r.wall_time);
    let mid = (runs.len() - 1) / 2;
    runs.swap_remove(mid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageShare {
    pub stage: &'static str,
    pub seconds: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stages: Vec<StageShare>,
    pub total_s: f64,
}

impl StageReport {
    pub fn largest(&self) -> &StageShare {
        self.stages
            .iter()
            .max_by(|a, b| a.seconds.total_cmp(&b.seconds))
            .expect("five stages")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("stage        seconds   share\n");
        for s in &self.stages {
            out.push_str(&format!(
                "{:<10} {:>9.2} {:>6.1}%\n",
                s.stage, s.seconds, s.percent
            ));
        }
        out.push_str(&format!("{:<10} {:>9.2}\n", "total", self.total_s));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data")
    }

    pub fn write_json(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(STAGES_FILE);
        let mut text = serde_json::to_string_pretty(&self.to_json())?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Breaks total job time down by stage. With all stages at zero every share
/// is reported as 0%.
pub fn render_stage_report(timings: &StageTimings) -> StageReport {
    let total = timings.total_s();
    let stages = timings
        .stages()
        .iter()
        .map(|&(stage, seconds)| StageShare {
            stage,
            seconds,
            percent: if total > 0.0 {
                seconds / total * 100.0
            } else {
                0.0
            },
        })
        .collect();
    StageReport {
        stages,
        total_s: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::simulated::{Fault, SimConfig, SimulatedBackend, WorkloadModel};
    use crate::backend::{CallLog, Recorded};
    use crate::config::{ExecTarget, IntRange, ScalabilitySpec, ScalingMode};
    use serde_json::Map;

    fn task(name: &str) -> TaskSpec {
        TaskSpec {
            task_name: name.into(),
            exec_target: ExecTarget::Simulated,
            image_ref: String::new(),
            scalability: ScalabilitySpec {
                script: "run.sh".into(),
                num_of_nodes: IntRange { min: 1, max: 2 },
                proc_per_node: IntRange { min: 1, max: 2 },
                mode: ScalingMode::Log2,
                repeats: 1,
            },
            output_parser: None,
            backend_conf: Map::new(),
            docker_extra: Map::new(),
            task_conf_extra: Map::new(),
            extra: Map::new(),
            warnings: Vec::new(),
        }
    }

    fn model_backend(faults: &[(ScalePoint, Fault)]) -> SimConfig {
        SimConfig {
            jitter_pct: 0.0,
            workload: Some(WorkloadModel::perfect(100.0)),
            faults: faults.iter().copied().collect(),
            ..SimConfig::default()
        }
    }

    fn pt(n: u32, p: u32) -> ScalePoint {
        ScalePoint::new(n, p).unwrap()
    }

    #[test]
    fn four_points_one_provision() {
        let dir = tempfile::tempdir().unwrap();
        let spec = task("t");
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let log = CallLog::new();
        let mut b = Recorded::new(SimulatedBackend::new(model_backend(&[])), log.clone());
        let opts = RunOptions {
            output_root: dir.path().into(),
            ..RunOptions::default()
        };
        let report = run_job(&mut b, &spec, &matrix, &opts).unwrap();
        assert_eq!(report.records.len(), 4);
        assert!(report.all_succeeded());
        assert_eq!(log.provisions(), vec![2]);
        assert_eq!(log.teardowns(), 1);
        let pts: Vec<_> = report.records.iter().map(|r| r.point).collect();
        assert_eq!(pts, matrix.points());
        for p in matrix.points() {
            assert!(dir
                .path()
                .join("t")
                .join(format!("{}.out", p.label()))
                .is_file());
        }
        // model: 100/1 + 100/2 + 100/2 + 100/4
        assert!((report.timings.execute_s - 225.0).abs() / 225.0 < 0.01);
        assert_eq!(
            report.timings.provision_s,
            report.allocation.provision_wall_time.as_secs_f64()
        );
    }

    #[test]
    fn provision_failure_skips_teardown() {
        let dir = tempfile::tempdir().unwrap();
        let spec = task("t");
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let log = CallLog::new();
        let cfg = SimConfig {
            fail_provision: true,
            ..SimConfig::default()
        };
        let mut b = Recorded::new(SimulatedBackend::new(cfg), log.clone());
        let opts = RunOptions {
            output_root: dir.path().into(),
            ..RunOptions::default()
        };
        assert!(matches!(
            run_job(&mut b, &spec, &matrix, &opts),
            Err(ExecError::Provision(_))
        ));
        assert_eq!(log.teardowns(), 0);
        assert_eq!(log.launches(), 0);
    }

    #[test]
    fn timed_out_point_with_continue_policy() {
        let dir = tempfile::tempdir().unwrap();
        let spec = task("t");
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let second = matrix.points()[1];
        let log = CallLog::new();
        let mut b = Recorded::new(
            SimulatedBackend::new(model_backend(&[(second, Fault::Timeout)])),
            log.clone(),
        );
        let opts = RunOptions {
            output_root: dir.path().into(),
            point_timeout: Some(Duration::from_secs(500)),
            ..RunOptions::default()
        };
        let report = run_job(&mut b, &spec, &matrix, &opts).unwrap();
        assert_eq!(report.records.len(), 4);
        assert!(report.records[1].result.timed_out);
        assert_eq!(report.failed_points(), vec![second]);
        assert_eq!(report.termination, Termination::Completed);
        assert_eq!(log.teardowns(), 1);
    }

    #[test]
    fn fail_fast_stops_after_first_failure() {
        let dir = tempfile::tempdir().unwrap();
        let spec = task("t");
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let second = matrix.points()[1];
        let log = CallLog::new();
        let mut b = Recorded::new(
            SimulatedBackend::new(model_backend(&[(second, Fault::Exit(2))])),
            log.clone(),
        );
        let opts = RunOptions {
            output_root: dir.path().into(),
            policy: FailurePolicy::FailFast,
            ..RunOptions::default()
        };
        let report = run_job(&mut b, &spec, &matrix, &opts).unwrap();
        assert_eq!(report.records.len(), 2);
        assert_eq!(report.termination, Termination::FailFast { point: second });
        assert_eq!(log.teardowns(), 1);
    }

    #[test]
    fn launch_error_is_recorded_as_failure() {
        let dir = tempfile::tempdir().unwrap();
        let spec = task("t");
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let mut b = SimulatedBackend::new(model_backend(&[(pt(1, 1), Fault::LaunchError)]));
        let opts = RunOptions {
            output_root: dir.path().into(),
            ..RunOptions::default()
        };
        let report = run_job(&mut b, &spec, &matrix, &opts).unwrap();
        assert_eq!(report.records.len(), 4);
        assert!(report.records[0].launch_error.is_some());
        assert_eq!(report.records[0].result.exit_code, LAUNCH_FAILURE_EXIT_CODE);
    }

    #[test]
    fn job_timeout_returns_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let spec = task("t");
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let log = CallLog::new();
        let cfg = SimConfig {
            base_latency_s: 0.0,
            per_node_latency_s: 0.0,
            ..model_backend(&[])
        };
        let mut b = Recorded::new(SimulatedBackend::new(cfg), log.clone());
        // 100s for the first point, then the deadline cuts the second (50s)
        let opts = RunOptions {
            output_root: dir.path().into(),
            job_timeout: Duration::from_secs(120),
            point_timeout: Some(Duration::from_secs(1000)),
            ..RunOptions::default()
        };
        let report = run_job(&mut b, &spec, &matrix, &opts).unwrap();
        assert_eq!(report.termination, Termination::JobTimeout);
        assert_eq!(report.records.len(), 2);
        assert!(report.records[0].succeeded());
        assert!(report.records[1].result.timed_out);
        assert_eq!(log.teardowns(), 1);
    }

    #[test]
    fn deadline_spent_by_provisioning() {
        let dir = tempfile::tempdir().unwrap();
        let spec = task("t");
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let log = CallLog::new();
        let mut b = Recorded::new(SimulatedBackend::new(model_backend(&[])), log.clone());
        let opts = RunOptions {
            output_root: dir.path().into(),
            job_timeout: Duration::from_secs(60),
            ..RunOptions::default()
        };
        let report = run_job(&mut b, &spec, &matrix, &opts).unwrap();
        assert_eq!(report.termination, Termination::JobTimeout);
        assert!(report.records.is_empty());
        assert_eq!(log.teardowns(), 1);
    }

    #[test]
    fn cancellation_still_tears_down() {
        let dir = tempfile::tempdir().unwrap();
        let spec = task("t");
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let log = CallLog::new();
        let mut b = Recorded::new(SimulatedBackend::new(model_backend(&[])), log.clone());
        let opts = RunOptions {
            output_root: dir.path().into(),
            ..RunOptions::default()
        };
        opts.cancel.cancel();
        let report = run_job(&mut b, &spec, &matrix, &opts).unwrap();
        assert_eq!(report.termination, Termination::Cancelled);
        assert_eq!(log.teardowns(), 1);
    }

    #[test]
    fn repeats_report_median_and_append_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = task("t");
        spec.scalability.num_of_nodes = IntRange { min: 1, max: 1 };
        spec.scalability.proc_per_node = IntRange { min: 1, max: 1 };
        spec.scalability.repeats = 3;
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let cfg = SimConfig {
            seed: 9,
            jitter_pct: 10.0,
            workload: Some(WorkloadModel::perfect(100.0)),
            ..SimConfig::default()
        };
        let mut b = SimulatedBackend::new(cfg);
        let opts = RunOptions {
            output_root: dir.path().into(),
            ..RunOptions::default()
        };
        let report = run_job(&mut b, &spec, &matrix, &opts).unwrap();
        let rec = &report.records[0];
        assert_eq!(rec.repeat_times.len(), 3);
        let mut sorted = rec.repeat_times.clone();
        sorted.sort();
        assert_eq!(rec.result.wall_time, sorted[1]);
        let text = std::fs::read_to_string(dir.path().join("t/1x1.out")).unwrap();
        assert_eq!(text.matches("elapsed=").count(), 3);
    }

    #[test]
    fn stale_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("t");
        std::fs::create_dir_all(&out).unwrap();
        std::fs::write(out.join("64x64.out"), "elapsed=1\n").unwrap();
        std::fs::write(out.join("notes.txt"), "keep").unwrap();
        let spec = task("t");
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let mut b = SimulatedBackend::new(model_backend(&[]));
        let opts = RunOptions {
            output_root: dir.path().into(),
            ..RunOptions::default()
        };
        run_job(&mut b, &spec, &matrix, &opts).unwrap();
        assert!(!out.join("64x64.out").exists());
        assert!(out.join("notes.txt").exists());
    }

    #[test]
    fn stage_report_examples() {
        let r = render_stage_report(&StageTimings {
            execute_s: 10.0,
            ..StageTimings::default()
        });
        assert_eq!(r.stages[2].percent, 100.0);
        assert_eq!(r.largest().stage, "execute");

        let r = render_stage_report(&StageTimings {
            provision_s: 600.0,
            execute_s: 300.0,
            ..StageTimings::default()
        });
        assert!((r.stages[1].percent - 66.666_666).abs() < 1e-3);
        let sum: f64 = r.stages.iter().map(|s| s.percent).sum();
        assert!((sum - 100.0).abs() <= 0.1);
        assert!(r.to_table().contains("66.7%"));
        let json = r.to_json();
        assert_eq!(json["stages"].as_array().unwrap().len(), 5);

        let zero = render_stage_report(&StageTimings::default());
        assert!(zero.stages.iter().all(|s| s.percent == 0.0));
    }

    #[test]
    fn default_simulated_run_is_dominated_by_provisioning() {
        let dir = tempfile::tempdir().unwrap();
        let spec = task("t");
        let matrix = planner::expand_matrix(&spec.scalability).unwrap();
        let mut b = SimulatedBackend::new(SimConfig {
            workload: Some(WorkloadModel::perfect(60.0)),
            ..SimConfig::default()
        });
        let opts = RunOptions {
            output_root: dir.path().into(),
            ..RunOptions::default()
        };
        let report = run_job(&mut b, &spec, &matrix, &opts).unwrap();
        let r = render_stage_report(&report.timings);
        assert_eq!(r.largest().stage, "provision");
        let path = r.write_json(&report.output_dir).unwrap();
        assert!(path.ends_with("t/stages.json"));
    }
}

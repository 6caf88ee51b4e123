//! The `swarmci` command line.
//!
//! Exit codes: 0 on success, 1 when a job, a test point or a publish fails,
//! 2 on configuration errors (bad task file, bad flags, missing variables).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::backend::{self, Backend, BackendError};
use crate::config::{self, ExecTarget, TaskSpec};
use crate::executor::{self, FailurePolicy, JobReport, RunOptions};
use crate::planner::{self, ScalePoint};
use crate::publisher::{self, PublishOptions, PublishTarget};
use crate::results::{self, ChangeKind, GitCommitResolver, ResultTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable names read by [`load_ci_environment`].
pub const CI_VARS: [&str; 9] = [
    "DOCKER_USERNAME",
    "DOCKER_PASSWORD",
    "REPO_TOKEN",
    "REPO_URL",
    "REPO_BRANCH",
    "BUILD_NUM",
    "OS_USERNAME",
    "OS_PASSWORD",
    "OS_RESERVATION_ID",
];

/// Variables that must be set before anything is published.
pub const PUBLISH_VARS: [&str; 4] = ["REPO_TOKEN", "REPO_URL", "REPO_BRANCH", "BUILD_NUM"];

/// A value that never prints itself.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Secret(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("***")
    }
}

impl fmt::Display for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("***")
    }
}

/// CI variables. The Docker and OpenStack entries are accepted and
/// redacted but not used by the shipped backends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiEnvironment {
    pub docker_username: Option<Secret>,
    pub docker_password: Option<Secret>,
    pub repo_token: Option<Secret>,
    pub repo_url: Option<String>,
    pub repo_branch: Option<String>,
    pub build_num: String,
    /// True when `BUILD_NUM` was absent and a local value was generated.
    pub build_num_defaulted: bool,
    pub os_username: Option<Secret>,
    pub os_password: Option<Secret>,
    pub os_reservation_id: Option<String>,
    /// Unset variables, in [`CI_VARS`] order.
    pub missing: Vec<&'static str>,
}

impl CiEnvironment {
    /// Every secret value, for redaction.
    pub fn secrets(&self) -> Vec<String> {
        [
            &self.docker_username,
            &self.docker_password,
            &self.repo_token,
            &self.os_username,
            &self.os_password,
        ]
        .into_iter()
        .flatten()
        .map(|s| s.expose().to_string())
        .collect()
    }

    pub fn publish_target(&self) -> Option<PublishTarget> {
        Some(PublishTarget {
            repo_url: self.repo_url.clone()?,
            branch: self.repo_branch.clone()?,
            token: self.repo_token.as_ref()?.expose().to_string(),
            build_num: self.build_num.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("missing required environment variable(s): {}", .0.join(", "))]
    MissingRequiredVar(Vec<&'static str>),
    #[error("BUILD_NUM may only contain letters, digits and '-', '_', '.', '+'")]
    InvalidBuildNum,
}

fn local_build_num() -> String {
    let ts = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("local-{ts}")
}

/// Reads the CI variables from `env`. Empty values count as unset. With
/// `publishing`, every variable in [`PUBLISH_VARS`] must be present.
pub fn load_ci_environment(
    env: &BTreeMap<String, String>,
    publishing: bool,
) -> Result<CiEnvironment, EnvError> {
    let get = |k: &str| env.get(k).filter(|v| !v.is_empty()).cloned();
    let missing: Vec<&'static str> = CI_VARS
        .iter()
        .copied()
        .filter(|k| get(k).is_none())
        .collect();
    if publishing {
        let absent: Vec<&'static str> = PUBLISH_VARS
            .iter()
            .copied()
            .filter(|k| missing.contains(k))
            .collect();
        if !absent.is_empty() {
            return Err(EnvError::MissingRequiredVar(absent));
        }
    }
    let (build_num, build_num_defaulted) = match get("BUILD_NUM") {
        Some(b) => (b, false),
        None => (local_build_num(), true),
    };
    if !results::valid_build_num(&build_num) {
        return Err(EnvError::InvalidBuildNum);
    }
    Ok(CiEnvironment {
        docker_username: get("DOCKER_USERNAME").map(Secret),
        docker_password: get("DOCKER_PASSWORD").map(Secret),
        repo_token: get("REPO_TOKEN").map(Secret),
        repo_url: get("REPO_URL"),
        repo_branch: get("REPO_BRANCH"),
        build_num,
        build_num_defaulted,
        os_username: get("OS_USERNAME").map(Secret),
        os_password: get("OS_PASSWORD").map(Secret),
        os_reservation_id: get("OS_RESERVATION_ID"),
        missing,
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "swarmci",
    version,
    about = "Scalability tests for CI pipelines"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the run matrix of a task file without touching any backend.
    Plan {
        beefile: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Provision, run every scale point, collect results and optionally publish.
    Run(RunArgs),
    /// Speedup of the latest build and changes across stored builds.
    Analyze(AnalyzeArgs),
    /// Commit and push an existing result file.
    Publish {
        file: PathBuf,
        /// Repository checkout to commit in.
        #[arg(long, default_value = ".")]
        repo: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub beefile: PathBuf,
    /// Backend to use instead of the task file's `exec_target`.
    #[arg(long)]
    pub backend: Option<String>,
    /// Whole-job limit in minutes.
    #[arg(long, default_value_t = 120.0)]
    pub timeout: f64,
    /// Per-point limit in seconds.
    #[arg(long)]
    pub point_timeout: Option<f64>,
    /// Push the result CSV to the repository afterwards.
    #[arg(long)]
    pub publish: bool,
    /// Stop at the first failing scale point.
    #[arg(long)]
    pub fail_fast: bool,
    /// Runs per scale point, overriding the task file.
    #[arg(long)]
    pub repeats: Option<u32>,
    /// Root directory for per-point output files.
    #[arg(long, default_value = "outputs")]
    pub outputs: PathBuf,
    /// Directory receiving the result CSV.
    #[arg(long, default_value = ".")]
    pub results_dir: PathBuf,
    /// Output parser to use instead of the task file's `output_parser`.
    #[arg(long)]
    pub parser: Option<PathBuf>,
    /// Repository checkout to commit in when publishing.
    #[arg(long, default_value = ".")]
    pub repo: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory holding `scalability_test_result_<build>.csv` files.
    pub results_dir: PathBuf,
    #[arg(long, default_value = "elapsed")]
    pub metric: String,
    /// Relative change, in percent, above which a transition is flagged.
    #[arg(long, default_value_t = results::DEFAULT_REGRESSION_THRESHOLD_PCT)]
    pub threshold: f64,
    /// Baseline point for speedups, e.g. `1x1`. Defaults to the smallest
    /// point of each node count.
    #[arg(long)]
    pub baseline: Option<ScalePoint>,
    /// Only check this point for regressions.
    #[arg(long)]
    pub point: Option<ScalePoint>,
    #[arg(long)]
    pub json: bool,
    /// Exit 1 when any degradation is flagged.
    #[arg(long)]
    pub fail_on_degradation: bool,
}

/// Builds the backend for a task; injectable for tests.
pub type BackendFactory<'a> = dyn Fn(&TaskSpec) -> Result<Box<dyn Backend>, BackendError> + 'a;

pub fn default_backend(spec: &TaskSpec) -> Result<Box<dyn Backend>, BackendError> {
    backend::build_backend(spec.exec_target, &spec.backend_conf, &spec.image_ref)
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let env: BTreeMap<String, String> = std::env::vars().collect();
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_with(
        std::env::args_os(),
        &env,
        &mut out,
        &mut err,
        &default_backend,
    )
}

/// Parses `args` and runs the command with an explicit environment and
/// output streams. Returns the process exit code.
pub fn run_with<I, T>(
    args: I,
    env: &BTreeMap<String, String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
    factory: &BackendFactory,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut io = Io {
        out,
        err,
        secrets: secret_values(env),
    };
    let git_env: Vec<(OsString, OsString)> = env
        .iter()
        .filter(|(k, _)| k.starts_with("GIT_"))
        .map(|(k, v)| (k.into(), v.into()))
        .collect();
    let result = match cli.command {
        Command::Plan { beefile, json } => cmd_plan(&mut io, &beefile, json),
        Command::Run(args) => cmd_run(&mut io, env, &git_env, &args, factory),
        Command::Analyze(args) => cmd_analyze(&mut io, &args),
        Command::Publish { file, repo } => cmd_publish(&mut io, env, &git_env, &file, &repo),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            io.error(&message);
            code
        }
    }
}

fn secret_values(env: &BTreeMap<String, String>) -> Vec<String> {
    [
        "DOCKER_USERNAME",
        "DOCKER_PASSWORD",
        "REPO_TOKEN",
        "OS_USERNAME",
        "OS_PASSWORD",
    ]
    .iter()
    .filter_map(|k| env.get(*k))
    .filter(|v| !v.is_empty())
    .cloned()
    .collect()
}

struct Failure {
    code: i32,
    message: String,
}

fn config_err(e: impl fmt::Display) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: e.to_string(),
    }
}

fn job_err(e: impl fmt::Display) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: e.to_string(),
    }
}

/// Output streams with every line redacted.
struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    secrets: Vec<String>,
}

impl Io<'_> {
    fn clean(&self, text: &str) -> String {
        let s: Vec<&str> = self.secrets.iter().map(String::as_str).collect();
        publisher::redact(text, &s)
    }

    fn say(&mut self, text: &str) {
        let t = self.clean(text);
        let _ = writeln!(self.out, "{t}");
    }

    fn note(&mut self, text: &str) {
        let t = self.clean(text);
        let _ = writeln!(self.err, "{t}");
    }

    fn error(&mut self, text: &str) {
        let t = self.clean(text);
        let _ = writeln!(self.err, "error: {t}");
    }
}

fn load_spec(io: &mut Io, path: &Path) -> Result<TaskSpec, Failure> {
    let raw = std::fs::read(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let spec = config::parse_taskspec(&raw).map_err(config_err)?;
    for w in &spec.warnings {
        io.note(&format!("warning: {}: {}", w.path, w.message));
    }
    Ok(spec)
}

fn check_backend_conf(spec: &TaskSpec) -> Result<(), Failure> {
    let findings = config::validate_backend_conf(spec);
    if findings.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = findings.iter().map(ToString::to_string).collect();
    Err(config_err(format!(
        "{} backend configuration:\n  {}",
        spec.exec_target,
        list.join("\n  ")
    )))
}

fn cmd_plan(io: &mut Io, beefile: &Path, json: bool) -> Result<i32, Failure> {
    let spec = load_spec(io, beefile)?;
    let matrix = planner::expand_matrix(&spec.scalability).map_err(config_err)?;
    if json {
        let doc = json!({
            "task_name": spec.task_name,
            "exec_target": spec.exec_target.name(),
            "matrix": matrix.to_json(),
        });
        io.say(&serde_json::to_string_pretty(&doc).unwrap_or_default());
    } else {
        io.say(&format!(
            "task {} on {}: {} points, provisioning {} node(s)",
            spec.task_name,
            spec.exec_target,
            matrix.len(),
            matrix.max_nodes()
        ));
        io.say(matrix.to_table().trim_end());
    }
    check_backend_conf(&spec)?;
    Ok(EXIT_OK)
}

fn seconds(s: f64, what: &str) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(s)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| config_err(format!("{what} must be a positive number")))
}

fn print_records(io: &mut Io, report: &JobReport) {
    for r in &report.records {
        let t = r.result.wall_time.as_secs_f64();
        let line = if r.succeeded() {
            format!("  {:<10} ok      {t:>10.3}s", r.point.label())
        } else if let Some(e) = &r.launch_error {
            format!("  {:<10} FAILED  launch error: {e}", r.point.label())
        } else if r.result.timed_out {
            format!("  {:<10} FAILED  timed out after {t:.3}s", r.point.label())
        } else {
            format!(
                "  {:<10} FAILED  exit {} after {t:.3}s",
                r.point.label(),
                r.result.exit_code
            )
        };
        io.say(&line);
    }
}

fn collect(
    spec: &TaskSpec,
    report: &JobReport,
    build_num: &str,
    results_dir: &Path,
) -> Result<PathBuf, Failure> {
    let table: ResultTable = match &spec.output_parser {
        Some(p) => results::invoke_parser(p, &report.output_dir, build_num),
        None => results::parse_key_value_dir(&report.output_dir, build_num),
    }
    .map_err(|e| job_err(format!("collect: {e}")))?;
    std::fs::create_dir_all(results_dir).map_err(|e| job_err(format!("collect: {e}")))?;
    results::write_result_csv(&table, results_dir).map_err(|e| job_err(format!("collect: {e}")))
}

fn cmd_run(
    io: &mut Io,
    env: &BTreeMap<String, String>,
    git_env: &[(OsString, OsString)],
    args: &RunArgs,
    factory: &BackendFactory,
) -> Result<i32, Failure> {
    let mut spec = load_spec(io, &args.beefile)?;
    if let Some(name) = &args.backend {
        spec.exec_target = name.parse::<ExecTarget>().map_err(config_err)?;
    }
    if let Some(p) = &args.parser {
        spec.output_parser = Some(p.clone());
    }
    check_backend_conf(&spec)?;
    let matrix = planner::expand_matrix(&spec.scalability).map_err(config_err)?;
    let ci = load_ci_environment(env, args.publish).map_err(config_err)?;
    io.secrets.extend(ci.secrets());
    let job_timeout = seconds(args.timeout * 60.0, "--timeout")?;
    let point_timeout = args
        .point_timeout
        .map(|s| seconds(s, "--point-timeout"))
        .transpose()?;
    if args.repeats == Some(0) {
        return Err(config_err("--repeats must be at least 1"));
    }
    if ci.build_num_defaulted {
        io.note(&format!("BUILD_NUM not set, using {}", ci.build_num));
    }

    let mut backend = factory(&spec).map_err(|e| match e {
        BackendError::Config { .. } => config_err(e),
        other => job_err(other),
    })?;
    io.say(&format!(
        "running {} ({} points on {}, build {})",
        spec.task_name,
        matrix.len(),
        backend.name(),
        ci.build_num
    ));
    let opts = RunOptions {
        job_timeout,
        point_timeout,
        policy: if args.fail_fast {
            FailurePolicy::FailFast
        } else {
            FailurePolicy::Continue
        },
        repeats: args.repeats,
        output_root: args.outputs.clone(),
        env: vec![("BUILD_NUM".into(), ci.build_num.clone())],
        ..RunOptions::default()
    };
    let mut report =
        executor::run_job(backend.as_mut(), &spec, &matrix, &opts).map_err(|e| match e {
            executor::ExecError::Plan(_) | executor::ExecError::ZeroTimeout => config_err(e),
            other => job_err(other),
        })?;
    print_records(io, &report);
    if let Some(e) = &report.teardown_error {
        io.note(&format!("warning: teardown: {e}"));
    }
    let mut code = if report.all_succeeded() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    };
    if report.termination != executor::Termination::Completed {
        io.error(&format!("job ended early: {}", report.termination));
    } else if code != EXIT_OK {
        let failed: Vec<String> = report
            .failed_points()
            .iter()
            .map(ScalePoint::label)
            .collect();
        io.error(&format!("failed points: {}", failed.join(", ")));
    }

    let started = Instant::now();
    let csv = collect(&spec, &report, &ci.build_num, &args.results_dir);
    report.timings.collect_s = started.elapsed().as_secs_f64();
    match &csv {
        Ok(path) => io.say(&format!("results: {}", path.display())),
        Err(f) => {
            io.error(&f.message);
            code = EXIT_FAILURE;
        }
    }

    if args.publish {
        if let Ok(path) = &csv {
            let target = ci
                .publish_target()
                .ok_or_else(|| config_err("publish target incomplete"))?;
            let opts = PublishOptions {
                repo_dir: args.repo.clone(),
                git_env: git_env.to_vec(),
                ..PublishOptions::default()
            };
            let started = Instant::now();
            let published = publisher::publish_result(path, &target, &opts);
            report.timings.publish_s = started.elapsed().as_secs_f64();
            match published {
                Ok(p) => io.say(&format!(
                    "published {} as {}",
                    p.path.display(),
                    p.commit_id
                )),
                Err(e) => {
                    io.error(&format!("publish: {e}"));
                    code = EXIT_FAILURE;
                }
            }
        } else {
            io.note("nothing to publish");
        }
    }

    let stages = executor::render_stage_report(&report.timings);
    io.say(stages.to_table().trim_end());
    if let Err(e) = stages.write_json(&report.output_dir) {
        io.note(&format!("warning: cannot write stage timings: {e}"));
    }
    Ok(code)
}

fn cmd_publish(
    io: &mut Io,
    env: &BTreeMap<String, String>,
    git_env: &[(OsString, OsString)],
    file: &Path,
    repo: &Path,
) -> Result<i32, Failure> {
    let ci = load_ci_environment(env, true).map_err(config_err)?;
    io.secrets.extend(ci.secrets());
    let name = file
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    match results::build_num_from_file_name(name) {
        Some(b) if b == ci.build_num => {}
        Some(b) => io.note(&format!(
            "warning: file is for build {b}, committing as build {}",
            ci.build_num
        )),
        None => io.note(&format!(
            "warning: {name} does not follow {}<build>{}",
            results::RESULT_FILE_PREFIX,
            results::RESULT_FILE_SUFFIX
        )),
    }
    let target = ci
        .publish_target()
        .ok_or_else(|| config_err("publish target incomplete"))?;
    let opts = PublishOptions {
        repo_dir: repo.to_path_buf(),
        git_env: git_env.to_vec(),
        ..PublishOptions::default()
    };
    match publisher::publish_result(file, &target, &opts) {
        Ok(p) => {
            io.say(&format!(
                "published {} as {}",
                p.path.display(),
                p.commit_id
            ));
            Ok(EXIT_OK)
        }
        Err(e @ publisher::PublishError::MissingFile(_)) => Err(config_err(e)),
        Err(e) => Err(job_err(format!("publish: {e}"))),
    }
}

fn cmd_analyze(io: &mut Io, args: &AnalyzeArgs) -> Result<i32, Failure> {
    if !args.results_dir.is_dir() {
        return Err(config_err(format!(
            "{} is not a directory",
            args.results_dir.display()
        )));
    }
    let series = results::load_series(&args.results_dir, &GitCommitResolver).map_err(config_err)?;
    let Some(latest) = series.latest() else {
        return Err(config_err(format!(
            "no result files in {}",
            args.results_dir.display()
        )));
    };
    let groups = results::speedup_by_nodes(&latest.table, &args.metric, args.baseline)
        .map_err(config_err)?;
    if groups.is_empty() {
        return Err(config_err(format!(
            "build {} has no {} values",
            latest.build_num, args.metric
        )));
    }

    let points: Vec<ScalePoint> = match args.point {
        Some(p) => vec![p],
        None => latest
            .table
            .rows()
            .iter()
            .filter(|r| r.metric == args.metric)
            .map(|r| r.point)
            .collect(),
    };
    let mut transitions = Vec::new();
    for p in points {
        match results::detect_regressions(&series, &args.metric, p, args.threshold) {
            Ok(flags) => transitions.extend(flags.into_iter().map(|t| (p, t))),
            Err(results::AnalysisError::InsufficientHistory { .. }) if args.point.is_none() => {}
            Err(e) => return Err(config_err(e)),
        }
    }
    let degraded = transitions
        .iter()
        .any(|(_, t)| t.kind == ChangeKind::Degradation);

    if args.json {
        let doc = json!({
            "build": latest.build_num,
            "commit": latest.commit_id,
            "metric": args.metric,
            "builds": series.len(),
            "threshold_pct": args.threshold,
            "speedup": groups.iter().map(|g| {
                let range = g.range();
                json!({
                    "nodes": g.nodes,
                    "baseline": g.baseline.label(),
                    "points": g.entries.iter().map(|(p, s)| json!({"point": p.label(), "speedup": s})).collect::<Vec<_>>(),
                    "min": range.map(|r| r.0),
                    "max": range.map(|r| r.1),
                })
            }).collect::<Vec<_>>(),
            "transitions": transitions.iter().map(|(p, t)| {
                let mut v = serde_json::to_value(t).unwrap_or_default();
                v["point"] = json!(p.label());
                v
            }).collect::<Vec<_>>(),
        });
        io.say(&serde_json::to_string_pretty(&doc).unwrap_or_default());
    } else {
        io.say(&format!(
            "build {} (commit {}), {} build(s), metric {}",
            latest.build_num,
            latest.commit_id,
            series.len(),
            args.metric
        ));
        io.say("speedup:");
        for g in &groups {
            let range = match g.range() {
                Some((lo, hi)) => format!("{lo:.2}x - {hi:.2}x"),
                None => "n/a".into(),
            };
            io.say(&format!(
                "  nodes {:<4} baseline {:<8} range {range}",
                g.nodes,
                g.baseline.label()
            ));
            for (p, s) in &g.entries {
                io.say(&format!("    {:<10} {s:>8.2}x", p.label()));
            }
        }
        if transitions.is_empty() {
            io.say(&format!("no changes above {}%", args.threshold));
        } else {
            io.say(&format!("changes above {}%:", args.threshold));
            for (p, t) in &transitions {
                let kind = match t.kind {
                    ChangeKind::Improvement => "improvement",
                    ChangeKind::Degradation => "degradation",
                };
                io.say(&format!(
                    "  {:<10} {} -> {} ({} -> {}): {} -> {} ({:+.1}%, {kind})",
                    p.label(),
                    t.from_build,
                    t.to_build,
                    t.from_commit,
                    t.to_commit,
                    results::format_value(t.from_value),
                    results::format_value(t.to_value),
                    t.change_pct
                ));
            }
        }
    }
    Ok(if degraded && args.fail_on_degradation {
        EXIT_FAILURE
    } else {
        EXIT_OK
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn full_variable_set() {
        let e = env(&[
            ("DOCKER_USERNAME", "du"),
            ("DOCKER_PASSWORD", "dp"),
            ("REPO_TOKEN", "rt"),
            ("REPO_URL", "github.com/o/r.git"),
            ("REPO_BRANCH", "main"),
            ("BUILD_NUM", "417"),
            ("OS_USERNAME", "ou"),
            ("OS_PASSWORD", "op"),
            ("OS_RESERVATION_ID", "res-1"),
        ]);
        let ci = load_ci_environment(&e, true).unwrap();
        assert!(ci.missing.is_empty());
        assert_eq!(ci.build_num, "417");
        assert_eq!(ci.repo_token.as_ref().unwrap().expose(), "rt");
        assert_eq!(ci.os_reservation_id.as_deref(), Some("res-1"));
        let dbg = format!("{ci:?}");
        for s in ["du", "dp", "rt", "ou", "op"] {
            assert!(!dbg.contains(&format!("\"{s}\"")), "{s} leaked in {dbg}");
        }
        assert_eq!(
            ci.publish_target().unwrap().remote_url(),
            "https://rt@github.com/o/r.git"
        );
    }

    #[test]
    fn local_mode_defaults_build_num() {
        let ci = load_ci_environment(&BTreeMap::new(), false).unwrap();
        assert!(ci.build_num.starts_with("local-"));
        assert!(ci.build_num_defaulted);
        assert_eq!(ci.missing.len(), 9);
    }

    #[test]
    fn publishing_requires_token() {
        let e = env(&[
            ("REPO_URL", "h/r"),
            ("REPO_BRANCH", "main"),
            ("BUILD_NUM", "1"),
        ]);
        assert_eq!(
            load_ci_environment(&e, true),
            Err(EnvError::MissingRequiredVar(vec!["REPO_TOKEN"]))
        );
        let e = env(&[
            ("REPO_TOKEN", ""),
            ("REPO_URL", "h/r"),
            ("REPO_BRANCH", "main"),
            ("BUILD_NUM", "1"),
        ]);
        assert!(load_ci_environment(&e, true).is_err());
    }

    #[test]
    fn bad_build_num() {
        let e = env(&[("BUILD_NUM", "../x")]);
        assert_eq!(
            load_ci_environment(&e, false),
            Err(EnvError::InvalidBuildNum)
        );
    }

    #[test]
    fn usage_errors_exit_2() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            ["swarmci", "bogus"],
            &BTreeMap::new(),
            &mut out,
            &mut err,
            &default_backend,
        );
        assert_eq!(code, EXIT_CONFIG);
        let code = run_with(
            ["swarmci", "--help"],
            &BTreeMap::new(),
            &mut out,
            &mut err,
            &default_backend,
        );
        assert_eq!(code, EXIT_OK);
    }
}

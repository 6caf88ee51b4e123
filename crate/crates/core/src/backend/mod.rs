//! Compute backends: provisioning, launch and teardown.
//!
//! A job provisions exactly once, at the largest node count the run matrix
//! needs, then launches every scale point against that allocation. Two
//! backends ship: [`simulated::SimulatedBackend`] for desk-scale runs and
//! tests, and [`ssh::SshBackend`] for a fixed set of reachable hosts.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::{Map, Value};
use thiserror::Error;

use crate::config::{ExecTarget, Finding};
use crate::planner::ScalePoint;

pub mod process;
pub mod simulated;
pub mod ssh;

/// Exit code reported for a launch killed by its timeout.
pub const TIMEOUT_EXIT_CODE: i32 = 124;
/// Exit code reported for a launch interrupted by cancellation.
pub const CANCELLED_EXIT_CODE: i32 = 130;
/// Exit code reported when the script could not be started at all.
pub const LAUNCH_FAILURE_EXIT_CODE: i32 = 127;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("insufficient capacity: requested {requested} node(s), {available} available")]
    InsufficientCapacity { requested: u32, available: u32 },
    #[error("provisioning timed out after {after:?}")]
    ProvisionTimeout { after: Duration },
    #[error("authentication failed for {host}: {detail}")]
    AuthFailure { host: String, detail: String },
    #[error("provisioning failed: {0}")]
    ProvisionFailed(String),
    #[error("launch failed: {0}")]
    LaunchFailure(String),
    #[error("teardown incomplete, unreachable: {}", unreachable.join(", "))]
    TeardownPartial { unreachable: Vec<String> },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend configuration: {}", findings.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Config { findings: Vec<Finding> },
    #[error("setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A live set of nodes owned by one job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub alloc_id: String,
    pub node_handles: Vec<String>,
    pub provision_wall_time: Duration,
}

impl Allocation {
    pub fn node_count(&self) -> u32 {
        self.node_handles.len() as u32
    }
}

static NEXT_ALLOC: AtomicU64 = AtomicU64::new(1);

/// Allocation ids are unique for the lifetime of the process.
pub(crate) fn next_alloc_id(prefix: &str) -> String {
    format!(
        "{prefix}-{}-{}",
        std::process::id(),
        NEXT_ALLOC.fetch_add(1, Ordering::Relaxed)
    )
}

/// Cooperative cancellation flag shared between a job and its launches.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone)]
pub struct LaunchRequest {
    pub point: ScalePoint,
    pub script: PathBuf,
    pub timeout: Duration,
    pub env: BTreeMap<String, String>,
    /// File receiving combined stdout and stderr.
    pub output_sink: PathBuf,
    /// Append to `output_sink` instead of truncating it (repeated runs).
    pub append: bool,
    pub cancel: Option<CancelToken>,
}

impl LaunchRequest {
    pub fn new(
        point: ScalePoint,
        script: impl Into<PathBuf>,
        output_sink: impl Into<PathBuf>,
    ) -> Self {
        Self {
            point,
            script: script.into(),
            timeout: Duration::from_secs(60),
            env: BTreeMap::new(),
            output_sink: output_sink.into(),
            append: false,
            cancel: None,
        }
    }

    /// `SWARM_*` variables every launch receives.
    pub fn swarm_env(&self) -> BTreeMap<String, String> {
        let mut env = self.env.clone();
        env.insert("SWARM_NODES".into(), self.point.nodes().to_string());
        env.insert("SWARM_PPN".into(), self.point.procs_per_node().to_string());
        env.insert(
            "SWARM_TOTAL_PROCS".into(),
            self.point.total_procs().to_string(),
        );
        env
    }

    pub(crate) fn check(&self, alloc: &Allocation) -> Result<(), BackendError> {
        if self.point.nodes() > alloc.node_count() {
            return Err(BackendError::InvalidRequest(format!(
                "point {} needs {} node(s), allocation {} has {}",
                self.point,
                self.point.nodes(),
                alloc.alloc_id,
                alloc.node_count()
            )));
        }
        if self.timeout.is_zero() {
            return Err(BackendError::InvalidRequest("timeout must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaunchResult {
    pub exit_code: i32,
    pub wall_time: Duration,
    pub timed_out: bool,
    pub output_path: PathBuf,
}

impl LaunchResult {
    pub fn succeeded(&self) -> bool {
        self.exit_code == 0 && !self.timed_out
    }
}

/// Time source used for stage accounting and deadlines.
///
/// Backends that model latency instead of waiting for it advance their clock
/// by the modeled amount, so job deadlines and stage timings see the same
/// time the backend reports.
pub trait Clock: Send + Sync {
    /// Time elapsed since the clock's origin.
    fn now(&self) -> Duration;
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Real elapsed time plus an offset advanced by modeled latencies.
#[derive(Debug)]
pub struct SimClock {
    origin: Instant,
    offset: Mutex<Duration>,
}

impl Default for SimClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
            offset: Mutex::new(Duration::ZERO),
        }
    }
}

impl SimClock {
    pub fn advance(&self, by: Duration) {
        *self.offset.lock().unwrap() += by;
    }
}

impl Clock for SimClock {
    fn now(&self) -> Duration {
        self.origin.elapsed() + *self.offset.lock().unwrap()
    }
}

pub trait Backend {
    fn name(&self) -> &str;

    /// One-off setup before provisioning, such as generating an access key.
    fn prepare(&mut self) -> Result<(), BackendError> {
        Ok(())
    }

    fn provision(&mut self, node_count: u32) -> Result<Allocation, BackendError>;

    fn launch(
        &mut self,
        alloc: &Allocation,
        req: &LaunchRequest,
    ) -> Result<LaunchResult, BackendError>;

    /// Releases every resource of `alloc`. A second call is a no-op.
    fn teardown(&mut self, alloc: &Allocation) -> Result<(), BackendError>;

    fn clock(&self) -> Arc<dyn Clock>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn prepare(&mut self) -> Result<(), BackendError> {
        (**self).prepare()
    }
    fn provision(&mut self, node_count: u32) -> Result<Allocation, BackendError> {
        (**self).provision(node_count)
    }
    fn launch(
        &mut self,
        alloc: &Allocation,
        req: &LaunchRequest,
    ) -> Result<LaunchResult, BackendError> {
        (**self).launch(alloc, req)
    }
    fn teardown(&mut self, alloc: &Allocation) -> Result<(), BackendError> {
        (**self).teardown(alloc)
    }
    fn clock(&self) -> Arc<dyn Clock> {
        (**self).clock()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendCall {
    Prepare,
    Provision { node_count: u32 },
    Launch { point: ScalePoint },
    Teardown { alloc_id: String },
}

/// Shared, append-only record of backend calls.
#[derive(Debug, Clone, Default)]
pub struct CallLog(Arc<Mutex<Vec<BackendCall>>>);

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, call: BackendCall) {
        self.0.lock().unwrap().push(call);
    }

    pub fn calls(&self) -> Vec<BackendCall> {
        self.0.lock().unwrap().clone()
    }

    pub fn provisions(&self) -> Vec<u32> {
        self.calls()
            .into_iter()
            .filter_map(|c| match c {
                BackendCall::Provision { node_count } => Some(node_count),
                _ => None,
            })
            .collect()
    }

    pub fn teardowns(&self) -> usize {
        self.calls()
            .iter()
            .filter(|c| matches!(c, BackendCall::Teardown { .. }))
            .count()
    }

    pub fn launches(&self) -> usize {
        self.calls()
            .iter()
            .filter(|c| matches!(c, BackendCall::Launch { .. }))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.lock().unwrap().is_empty()
    }
}

/// Wraps a backend and records every call into a [`CallLog`].
pub struct Recorded<B> {
    inner: B,
    log: CallLog,
}

impl<B: Backend> Recorded<B> {
    pub fn new(inner: B, log: CallLog) -> Self {
        Self { inner, log }
    }

    pub fn log(&self) -> &CallLog {
        &self.log
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: Backend> Backend for Recorded<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn prepare(&mut self) -> Result<(), BackendError> {
        self.log.push(BackendCall::Prepare);
        self.inner.prepare()
    }

    fn provision(&mut self, node_count: u32) -> Result<Allocation, BackendError> {
        self.log.push(BackendCall::Provision { node_count });
        self.inner.provision(node_count)
    }

    fn launch(
        &mut self,
        alloc: &Allocation,
        req: &LaunchRequest,
    ) -> Result<LaunchResult, BackendError> {
        self.log.push(BackendCall::Launch { point: req.point });
        self.inner.launch(alloc, req)
    }

    fn teardown(&mut self, alloc: &Allocation) -> Result<(), BackendError> {
        self.log.push(BackendCall::Teardown {
            alloc_id: alloc.alloc_id.clone(),
        });
        self.inner.teardown(alloc)
    }

    fn clock(&self) -> Arc<dyn Clock> {
        self.inner.clock()
    }
}

/// Builds the backend selected by `target` from its configuration block.
pub fn build_backend(
    target: ExecTarget,
    conf: &Map<String, Value>,
    image_ref: &str,
) -> Result<Box<dyn Backend>, BackendError> {
    Ok(match target {
        ExecTarget::Simulated => Box::new(simulated::SimulatedBackend::from_conf(conf)?),
        ExecTarget::SshCluster => Box::new(ssh::SshBackend::from_conf(conf, image_ref)?),
    })
}

pub(crate) fn unknown_key_findings(conf: &Map<String, Value>, known: &[&str]) -> Vec<Finding> {
    conf.keys()
        .filter(|k| !known.contains(&k.as_str()))
        .map(|k| Finding::new(format!("$.exec_env_conf.{k}"), "unknown key"))
        .collect()
}

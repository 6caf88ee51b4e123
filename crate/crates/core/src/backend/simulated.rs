//! Local backend with modeled provisioning latency.
//!
//! Provisioning is modeled as `(base_latency_s + per_node_latency_s * nodes)`
//! scaled by a seeded jitter factor in `[1 - jitter_pct/100, 1 + jitter_pct/100]`.
//! The modeled time advances the backend's [`SimClock`] instead of blocking.
//!
//! Launches either run the task script locally, or, when a `workload` block
//! is configured, evaluate `T(p) = t1_s * (serial_fraction + (1 - serial_fraction) / p)`
//! for `p` total processes and write `<metric>=<T>` to the output file.
//! Faults can be injected per scale point.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use super::process::{self, open_sink, DEFAULT_GRACE};
use super::{
    next_alloc_id, unknown_key_findings, Allocation, Backend, BackendError, Clock, LaunchRequest,
    LaunchResult, SimClock, CANCELLED_EXIT_CODE, TIMEOUT_EXIT_CODE,
};
use crate::config::Finding;
use crate::planner::ScalePoint;

pub const DEFAULT_BASE_LATENCY_S: f64 = 780.0;
pub const DEFAULT_PER_NODE_LATENCY_S: f64 = 3.0;
pub const DEFAULT_JITTER_PCT: f64 = 1.0;

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "base_latency_s",
    "per_node_latency_s",
    "jitter_pct",
    "capacity",
    "provision_timeout_s",
    "fail_provision",
    "workload",
    "faults",
];

/// Synthetic workload: `T(p) = t1_s * (serial_fraction + (1 - serial_fraction) / p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadModel {
    pub t1_s: f64,
    pub serial_fraction: f64,
    pub metric: String,
}

impl WorkloadModel {
    pub fn perfect(t1_s: f64) -> Self {
        Self {
            t1_s,
            serial_fraction: 0.0,
            metric: "elapsed".into(),
        }
    }

    pub fn time_for(&self, total_procs: u64) -> f64 {
        let p = total_procs as f64;
        self.t1_s * (self.serial_fraction + (1.0 - self.serial_fraction) / p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// The run hits its timeout.
    Timeout,
    /// The run exits with this code.
    Exit(i32),
    /// The script cannot be started.
    LaunchError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub base_latency_s: f64,
    pub per_node_latency_s: f64,
    pub jitter_pct: f64,
    /// Largest allocation the simulated platform grants.
    pub capacity: Option<u32>,
    pub provision_timeout_s: Option<f64>,
    pub fail_provision: bool,
    pub workload: Option<WorkloadModel>,
    pub faults: BTreeMap<ScalePoint, Fault>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            base_latency_s: DEFAULT_BASE_LATENCY_S,
            per_node_latency_s: DEFAULT_PER_NODE_LATENCY_S,
            jitter_pct: DEFAULT_JITTER_PCT,
            capacity: None,
            provision_timeout_s: None,
            fail_provision: false,
            workload: None,
            faults: BTreeMap::new(),
        }
    }
}

impl SimConfig {
    pub fn from_conf(conf: &Map<String, Value>) -> Result<Self, Vec<Finding>> {
        let mut findings = unknown_key_findings(conf, KNOWN_KEYS);
        let mut cfg = SimConfig::default();

        let num = |key: &str, findings: &mut Vec<Finding>| -> Option<f64> {
            let v = conf.get(key)?;
            match v.as_f64() {
                Some(x) if x.is_finite() && x >= 0.0 => Some(x),
                _ => {
                    findings.push(Finding::new(
                        format!("$.exec_env_conf.{key}"),
                        "expected a non-negative number",
                    ));
                    None
                }
            }
        };

        if let Some(v) = conf.get("seed") {
            match v.as_u64() {
                Some(s) => cfg.seed = s,
                None => findings.push(Finding::new(
                    "$.exec_env_conf.seed",
                    "expected a non-negative integer",
                )),
            }
        }
        if let Some(x) = num("base_latency_s", &mut findings) {
            cfg.base_latency_s = x;
        }
        if let Some(x) = num("per_node_latency_s", &mut findings) {
            cfg.per_node_latency_s = x;
        }
        if let Some(x) = num("jitter_pct", &mut findings) {
            if x >= 100.0 {
                findings.push(Finding::new(
                    "$.exec_env_conf.jitter_pct",
                    "must be below 100",
                ));
            } else {
                cfg.jitter_pct = x;
            }
        }
        if let Some(v) = conf.get("capacity") {
            match v.as_u64().and_then(|c| u32::try_from(c).ok()) {
                Some(c) if c >= 1 => cfg.capacity = Some(c),
                _ => findings.push(Finding::new(
                    "$.exec_env_conf.capacity",
                    "expected a positive integer",
                )),
            }
        }
        if let Some(x) = num("provision_timeout_s", &mut findings) {
            cfg.provision_timeout_s = Some(x);
        }
        if let Some(v) = conf.get("fail_provision") {
            match v.as_bool() {
                Some(b) => cfg.fail_provision = b,
                None => findings.push(Finding::new(
                    "$.exec_env_conf.fail_provision",
                    "expected a boolean",
                )),
            }
        }
        if let Some(v) = conf.get("workload") {
            match parse_workload(v) {
                Ok(w) => cfg.workload = Some(w),
                Err(f) => findings.extend(f),
            }
        }
        if let Some(v) = conf.get("faults") {
            match parse_faults(v) {
                Ok(f) => cfg.faults = f,
                Err(f) => findings.extend(f),
            }
        }

        if findings.is_empty() {
            Ok(cfg)
        } else {
            Err(findings)
        }
    }

    /// Modeled provisioning time for `nodes` nodes, jitter included.
    pub fn provision_time(&self, nodes: u32) -> Duration {
        let base = self.base_latency_s + self.per_node_latency_s * f64::from(nodes);
        let t = base * self.jitter_factor("provision");
        Duration::from_secs_f64(t.max(0.0))
    }

    fn jitter_factor(&self, key: &str) -> f64 {
        if self.jitter_pct == 0.0 {
            return 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(key.as_bytes()));
        let j = self.jitter_pct / 100.0;
        1.0 + rng.gen_range(-j..=j)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn parse_workload(v: &Value) -> Result<WorkloadModel, Vec<Finding>> {
    const P: &str = "$.exec_env_conf.workload";
    let obj = v
        .as_object()
        .ok_or_else(|| vec![Finding::new(P, "expected an object")])?;
    let mut findings = Vec::new();
    let t1_s = match obj.get("t1_s").and_then(Value::as_f64) {
        Some(t) if t.is_finite() && t > 0.0 => t,
        _ => {
            findings.push(Finding::new(
                format!("{P}.t1_s"),
                "expected a positive number",
            ));
            1.0
        }
    };
    let serial_fraction = match obj.get("serial_fraction") {
        None => 0.0,
        Some(v) => match v.as_f64() {
            Some(s) if (0.0..=1.0).contains(&s) => s,
            _ => {
                findings.push(Finding::new(
                    format!("{P}.serial_fraction"),
                    "expected a number in [0, 1]",
                ));
                0.0
            }
        },
    };
    let metric = match obj.get("metric") {
        None => "elapsed".to_string(),
        Some(Value::String(s)) if !s.trim().is_empty() && !s.contains(['=', '\n']) => s.clone(),
        Some(_) => {
            findings.push(Finding::new(
                format!("{P}.metric"),
                "expected a metric name",
            ));
            String::new()
        }
    };
    for k in obj.keys() {
        if !["t1_s", "serial_fraction", "metric"].contains(&k.as_str()) {
            findings.push(Finding::new(format!("{P}.{k}"), "unknown key"));
        }
    }
    if findings.is_empty() {
        Ok(WorkloadModel {
            t1_s,
            serial_fraction,
            metric,
        })
    } else {
        Err(findings)
    }
}

fn parse_faults(v: &Value) -> Result<BTreeMap<ScalePoint, Fault>, Vec<Finding>> {
    const P: &str = "$.exec_env_conf.faults";
    let arr = v
        .as_array()
        .ok_or_else(|| vec![Finding::new(P, "expected an array")])?;
    let mut out = BTreeMap::new();
    let mut findings = Vec::new();
    for (i, f) in arr.iter().enumerate() {
        let path = format!("{P}[{i}]");
        let point = f
            .get("point")
            .and_then(Value::as_str)
            .and_then(|s| s.parse::<ScalePoint>().ok());
        let kind = f.get("kind").and_then(Value::as_str);
        let fault = match kind {
            Some("timeout") => Some(Fault::Timeout),
            Some("launch_error") => Some(Fault::LaunchError),
            Some("exit") => f
                .get("exit_code")
                .and_then(Value::as_i64)
                .and_then(|c| i32::try_from(c).ok())
                .map(Fault::Exit),
            _ => None,
        };
        match (point, fault) {
            (Some(p), Some(fault)) => {
                out.insert(p, fault);
            }
            (None, _) => findings.push(Finding::new(
                format!("{path}.point"),
                "expected \"<nodes>x<ppn>\"",
            )),
            (_, None) => findings.push(Finding::new(
                format!("{path}.kind"),
                "expected timeout, launch_error, or exit with exit_code",
            )),
        }
    }
    if findings.is_empty() {
        Ok(out)
    } else {
        Err(findings)
    }
}

pub fn validate_conf(conf: &Map<String, Value>) -> Vec<Finding> {
    SimConfig::from_conf(conf).err().unwrap_or_default()
}

pub struct SimulatedBackend {
    config: SimConfig,
    clock: Arc<SimClock>,
    live: HashSet<String>,
    released: HashSet<String>,
    launch_counts: HashMap<ScalePoint, u32>,
    grace: Duration,
}

impl SimulatedBackend {
    pub fn new(config: SimConfig) -> Self {
        Self {
            config,
            clock: Arc::new(SimClock::default()),
            live: HashSet::new(),
            released: HashSet::new(),
            launch_counts: HashMap::new(),
            grace: DEFAULT_GRACE,
        }
    }

    pub fn from_conf(conf: &Map<String, Value>) -> Result<Self, BackendError> {
        SimConfig::from_conf(conf)
            .map(Self::new)
            .map_err(|findings| BackendError::Config { findings })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn with_grace(mut self, grace: Duration) -> Self {
        self.grace = grace;
        self
    }

    fn write_output(path: &Path, append: bool, text: &str) -> Result<(), BackendError> {
        let mut f = open_sink(path, append)?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    fn modeled_result(
        &self,
        req: &LaunchRequest,
        seconds: f64,
        exit_code: i32,
        body: &str,
    ) -> Result<LaunchResult, BackendError> {
        let timeout = req.timeout.as_secs_f64();
        let timed_out = seconds > timeout;
        let wall = Duration::from_secs_f64(seconds.min(timeout));
        self.clock.advance(wall);
        let text = if timed_out {
            format!(
                "# simulated run of {} timed out after {timeout}s\n",
                req.point
            )
        } else {
            body.to_string()
        };
        Self::write_output(&req.output_sink, req.append, &text)?;
        Ok(LaunchResult {
            exit_code: if timed_out {
                TIMEOUT_EXIT_CODE
            } else {
                exit_code
            },
            wall_time: wall,
            timed_out,
            output_path: req.output_sink.clone(),
        })
    }
}

impl Backend for SimulatedBackend {
    fn name(&self) -> &str {
        "simulated"
    }

    fn provision(&mut self, node_count: u32) -> Result<Allocation, BackendError> {
        if node_count == 0 {
            return Err(BackendError::InvalidRequest(
                "node_count must be >= 1".into(),
            ));
        }
        if self.config.fail_provision {
            return Err(BackendError::ProvisionFailed(
                "injected provisioning failure".into(),
            ));
        }
        if let Some(cap) = self.config.capacity {
            if node_count > cap {
                return Err(BackendError::InsufficientCapacity {
                    requested: node_count,
                    available: cap,
                });
            }
        }
        let t = self.config.provision_time(node_count);
        if let Some(limit) = self.config.provision_timeout_s {
            let limit = Duration::from_secs_f64(limit);
            if t > limit {
                self.clock.advance(limit);
                return Err(BackendError::ProvisionTimeout { after: limit });
            }
        }
        self.clock.advance(t);
        let alloc_id = next_alloc_id("sim");
        let node_handles = (0..node_count)
            .map(|i| format!("{alloc_id}/node{i:04}"))
            .collect();
        self.live.insert(alloc_id.clone());
        log::info!("simulated allocation {alloc_id}: {node_count} node(s) in {t:.1?} (modeled)");
        Ok(Allocation {
            alloc_id,
            node_handles,
            provision_wall_time: t,
        })
    }

    fn launch(
        &mut self,
        alloc: &Allocation,
        req: &LaunchRequest,
    ) -> Result<LaunchResult, BackendError> {
        if !self.live.contains(&alloc.alloc_id) {
            return Err(BackendError::InvalidRequest(format!(
                "allocation {} is not live",
                alloc.alloc_id
            )));
        }
        req.check(alloc)?;
        let n = self.launch_counts.entry(req.point).or_insert(0);
        let repeat = *n;
        *n += 1;

        if req.cancel.as_ref().is_some_and(|c| c.is_cancelled()) {
            Self::write_output(&req.output_sink, req.append, "# cancelled\n")?;
            return Ok(LaunchResult {
                exit_code: CANCELLED_EXIT_CODE,
                wall_time: Duration::ZERO,
                timed_out: false,
                output_path: req.output_sink.clone(),
            });
        }

        match self.config.faults.get(&req.point).copied() {
            Some(Fault::LaunchError) => {
                return Err(BackendError::LaunchFailure(format!(
                    "injected launch failure at {}",
                    req.point
                )))
            }
            Some(Fault::Timeout) => {
                return self.modeled_result(req, f64::INFINITY, TIMEOUT_EXIT_CODE, "");
            }
            Some(Fault::Exit(code)) => {
                let body = format!("# injected exit {code}\n");
                return self.modeled_result(req, 0.0, code, &body);
            }
            None => {}
        }

        if let Some(w) = &self.config.workload {
            let key = format!("launch:{}:{repeat}", req.point);
            let t = w.time_for(req.point.total_procs()) * self.config.jitter_factor(&key);
            let body = format!(
                "# simulated workload at {}\n{}={}\n",
                req.point, w.metric, t
            );
            return self.modeled_result(req, t, 0, &body);
        }

        if !req.script.is_file() {
            return Err(BackendError::LaunchFailure(format!(
                "script {} not found",
                req.script.display()
            )));
        }
        let script = std::fs::canonicalize(&req.script)?;
        let mut cmd = Command::new(&script);
        cmd.envs(req.swarm_env()).env(
            "SWARM_HOSTS",
            alloc.node_handles[..req.point.nodes() as usize].join(","),
        );
        let outcome = process::run_captured(
            cmd,
            &req.output_sink,
            req.append,
            req.timeout,
            self.grace,
            req.cancel.as_ref(),
        )
        .map_err(|e| {
            BackendError::LaunchFailure(format!("cannot run {}: {e}", req.script.display()))
        })?;
        Ok(LaunchResult {
            exit_code: outcome.exit_code,
            wall_time: outcome.wall_time,
            timed_out: outcome.timed_out,
            output_path: req.output_sink.clone(),
        })
    }

    fn teardown(&mut self, alloc: &Allocation) -> Result<(), BackendError> {
        if self.live.remove(&alloc.alloc_id) {
            self.released.insert(alloc.alloc_id.clone());
            log::info!("simulated allocation {} released", alloc.alloc_id);
        }
        Ok(())
    }

    fn clock(&self) -> Arc<dyn Clock> {
        self.clock.clone()
    }
}

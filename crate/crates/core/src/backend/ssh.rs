//! Backend for a fixed list of hosts reachable over SSH.
//!
//! Provisioning claims the first `node_count` hosts, creates a per-allocation
//! working directory on each and, when the task names an image, pulls it on
//! every node. Launches copy the script and a rank hostfile to the head node
//! (the first host) and run the script there with the `SWARM_*` variables.
//! Ranks are placed round-robin over the nodes of the scale point.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{Map, Value};

use super::process::{self, CommandOutput, DEFAULT_GRACE};
use super::{
    next_alloc_id, unknown_key_findings, Allocation, Backend, BackendError, Clock, LaunchRequest,
    LaunchResult, SystemClock,
};
use crate::config::Finding;

type SetupResult = Result<(), (RemoteFailure, String)>;

const KNOWN_KEYS: &[&str] = &[
    "hosts",
    "user",
    "identity_file",
    "generate_key",
    "workdir",
    "port",
    "connect_timeout_s",
    "stage_image",
    "pull_command",
    "ssh_program",
    "keygen_program",
];

pub const DEFAULT_WORKDIR: &str = "/tmp/swarmci";
const CONTROL_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Identity {
    /// Whatever the local ssh configuration and agent provide.
    Ambient,
    File(PathBuf),
    /// Ephemeral ed25519 key generated during [`Backend::prepare`].
    Generate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SshConfig {
    pub hosts: Vec<String>,
    pub user: Option<String>,
    pub identity: Identity,
    pub workdir: String,
    pub port: Option<u16>,
    pub connect_timeout_s: u64,
    pub stage_image: bool,
    pub pull_command: String,
    pub ssh_program: PathBuf,
    pub keygen_program: PathBuf,
}

impl SshConfig {
    pub fn new(hosts: Vec<String>) -> Self {
        Self {
            hosts,
            user: None,
            identity: Identity::Ambient,
            workdir: DEFAULT_WORKDIR.into(),
            port: None,
            connect_timeout_s: 10,
            stage_image: true,
            pull_command: "docker pull".into(),
            ssh_program: "ssh".into(),
            keygen_program: "ssh-keygen".into(),
        }
    }

    pub fn from_conf(conf: &Map<String, Value>) -> Result<Self, Vec<Finding>> {
        let mut findings = unknown_key_findings(conf, KNOWN_KEYS);
        let path = |k: &str| format!("$.exec_env_conf.{k}");
        let string = |k: &str, findings: &mut Vec<Finding>| -> Option<String> {
            match conf.get(k)? {
                Value::String(s) if !s.is_empty() => Some(s.clone()),
                _ => {
                    findings.push(Finding::new(path(k), "expected a nonempty string"));
                    None
                }
            }
        };

        let hosts: Vec<String> = match conf.get("hosts") {
            None => {
                findings.push(Finding::new(path("hosts"), "missing required host list"));
                Vec::new()
            }
            Some(Value::Array(items)) => {
                let hosts: Vec<String> = items
                    .iter()
                    .filter_map(|h| h.as_str().map(str::trim).filter(|s| !s.is_empty()))
                    .map(String::from)
                    .collect();
                if hosts.len() != items.len() {
                    findings.push(Finding::new(
                        path("hosts"),
                        "hosts must be nonempty strings",
                    ));
                } else if hosts.is_empty() {
                    findings.push(Finding::new(path("hosts"), "host list is empty"));
                }
                let unique: HashSet<_> = hosts.iter().collect();
                if unique.len() != hosts.len() {
                    findings.push(Finding::new(path("hosts"), "duplicate hosts"));
                }
                hosts
            }
            Some(_) => {
                findings.push(Finding::new(
                    path("hosts"),
                    "expected an array of host names",
                ));
                Vec::new()
            }
        };

        let mut cfg = SshConfig::new(hosts);
        cfg.user = string("user", &mut findings);
        let identity_file = string("identity_file", &mut findings);
        let generate = match conf.get("generate_key") {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(_) => {
                findings.push(Finding::new(path("generate_key"), "expected a boolean"));
                false
            }
        };
        cfg.identity = match (identity_file, generate) {
            (Some(_), true) => {
                findings.push(Finding::new(
                    path("generate_key"),
                    "identity_file and generate_key are mutually exclusive",
                ));
                Identity::Ambient
            }
            (Some(f), false) => Identity::File(f.into()),
            (None, true) => Identity::Generate,
            (None, false) => Identity::Ambient,
        };
        if let Some(w) = string("workdir", &mut findings) {
            if !w.starts_with('/') {
                findings.push(Finding::new(path("workdir"), "must be an absolute path"));
            }
            cfg.workdir = w;
        }
        if let Some(v) = conf.get("port") {
            match v.as_u64().and_then(|p| u16::try_from(p).ok()) {
                Some(p) if p > 0 => cfg.port = Some(p),
                _ => findings.push(Finding::new(path("port"), "expected a TCP port")),
            }
        }
        if let Some(v) = conf.get("connect_timeout_s") {
            match v.as_u64() {
                Some(t) if t > 0 => cfg.connect_timeout_s = t,
                _ => findings.push(Finding::new(
                    path("connect_timeout_s"),
                    "expected a positive integer",
                )),
            }
        }
        if let Some(v) = conf.get("stage_image") {
            match v.as_bool() {
                Some(b) => cfg.stage_image = b,
                None => findings.push(Finding::new(path("stage_image"), "expected a boolean")),
            }
        }
        if let Some(s) = string("pull_command", &mut findings) {
            cfg.pull_command = s;
        }
        if let Some(s) = string("ssh_program", &mut findings) {
            cfg.ssh_program = s.into();
        }
        if let Some(s) = string("keygen_program", &mut findings) {
            cfg.keygen_program = s.into();
        }

        if findings.is_empty() {
            Ok(cfg)
        } else {
            Err(findings)
        }
    }
}

/// Findings for an `ssh-cluster` block. `required_nodes` is the planner's
/// provisioning size, when the matrix could be computed.
pub fn validate_conf(conf: &Map<String, Value>, required_nodes: Option<u32>) -> Vec<Finding> {
    match SshConfig::from_conf(conf) {
        Err(findings) => findings,
        Ok(cfg) => match required_nodes {
            Some(n) if (cfg.hosts.len() as u64) < u64::from(n) => vec![Finding::new(
                "$.exec_env_conf.hosts",
                format!(
                    "insufficient hosts: {} configured, {} required",
                    cfg.hosts.len(),
                    n
                ),
            )],
            _ => Vec::new(),
        },
    }
}

/// Host for each rank, placing ranks round-robin over `hosts`.
pub fn place_ranks(total_procs: u64, hosts: &[String]) -> Vec<&str> {
    if hosts.is_empty() {
        return Vec::new();
    }
    (0..total_procs)
        .map(|r| hosts[(r % hosts.len() as u64) as usize].as_str())
        .collect()
}

/// Single-quotes `s` for a POSIX shell.
pub fn sh_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RemoteFailure {
    Auth,
    Timeout,
    Unreachable,
    Command,
}

fn classify(out: &CommandOutput) -> Option<RemoteFailure> {
    if out.timed_out {
        return Some(RemoteFailure::Timeout);
    }
    if out.exit_code == 0 {
        return None;
    }
    if out.exit_code == 255 {
        let e = out.stderr.to_ascii_lowercase();
        if e.contains("permission denied") || e.contains("host key verification failed") {
            return Some(RemoteFailure::Auth);
        }
        if e.contains("timed out") {
            return Some(RemoteFailure::Timeout);
        }
        return Some(RemoteFailure::Unreachable);
    }
    Some(RemoteFailure::Command)
}

pub struct SshBackend {
    config: SshConfig,
    image_ref: String,
    identity_file: Option<PathBuf>,
    key_dir: Option<tempfile::TempDir>,
    clock: Arc<SystemClock>,
    live: HashMap<String, Vec<String>>,
    grace: Duration,
}

impl SshBackend {
    pub fn new(config: SshConfig, image_ref: &str) -> Self {
        let identity_file = match &config.identity {
            Identity::File(p) => Some(p.clone()),
            _ => None,
        };
        Self {
            config,
            image_ref: image_ref.to_string(),
            identity_file,
            key_dir: None,
            clock: Arc::new(SystemClock::default()),
            live: HashMap::new(),
            grace: DEFAULT_GRACE,
        }
    }

    pub fn from_conf(conf: &Map<String, Value>, image_ref: &str) -> Result<Self, BackendError> {
        SshConfig::from_conf(conf)
            .map(|c| Self::new(c, image_ref))
            .map_err(|findings| BackendError::Config { findings })
    }

    pub fn config(&self) -> &SshConfig {
        &self.config
    }

    /// Identity file in use, including a generated one.
    pub fn identity_file(&self) -> Option<&Path> {
        self.identity_file.as_deref()
    }

    fn ssh(&self, host: &str, remote: &str) -> Command {
        let mut c = Command::new(&self.config.ssh_program);
        c.args(["-o", "BatchMode=yes"])
            .args(["-o", "StrictHostKeyChecking=accept-new"])
            .args([
                "-o",
                &format!("ConnectTimeout={}", self.config.connect_timeout_s),
            ]);
        if let Some(p) = self.config.port {
            c.args(["-p", &p.to_string()]);
        }
        if let Some(id) = &self.identity_file {
            c.arg("-i").arg(id);
        }
        let target = match &self.config.user {
            Some(u) => format!("{u}@{host}"),
            None => host.to_string(),
        };
        c.arg(target).arg(remote);
        c
    }

    fn control(
        &self,
        host: &str,
        remote: &str,
        input: &[u8],
    ) -> Result<CommandOutput, BackendError> {
        let out = process::run_with_input(self.ssh(host, remote), input, CONTROL_TIMEOUT).map_err(
            |e| {
                BackendError::Setup(format!(
                    "cannot run {}: {e}",
                    self.config.ssh_program.display()
                ))
            },
        )?;
        Ok(out)
    }

    fn alloc_dir(&self, alloc_id: &str) -> String {
        format!("{}/{}", self.config.workdir.trim_end_matches('/'), alloc_id)
    }

    fn setup_host(&self, host: &str, dir: &str) -> SetupResult {
        let run = |remote: String| -> SetupResult {
            let out = self
                .control(host, &remote, b"")
                .map_err(|e| (RemoteFailure::Command, e.to_string()))?;
            match classify(&out) {
                None => Ok(()),
                Some(kind) => Err((kind, out.stderr.trim().to_string())),
            }
        };
        run(format!("mkdir -p {}", sh_quote(dir)))?;
        if self.config.stage_image && !self.image_ref.is_empty() {
            run(format!(
                "{} {}",
                self.config.pull_command,
                sh_quote(&self.image_ref)
            ))?;
        }
        Ok(())
    }

    fn release_hosts(&self, hosts: &[String], dir: &str) -> Vec<String> {
        thread::scope(|s| {
            let handles: Vec<_> = hosts
                .iter()
                .map(|h| {
                    s.spawn(move || {
                        let ok = self
                            .control(h, &format!("rm -rf {}", sh_quote(dir)), b"")
                            .map(|o| classify(&o).is_none())
                            .unwrap_or(false);
                        (h.clone(), ok)
                    })
                })
                .collect();
            handles
                .into_iter()
                .filter_map(|j| {
                    let (h, ok) = j.join().expect("teardown worker");
                    (!ok).then_some(h)
                })
                .collect()
        })
    }
}

impl Backend for SshBackend {
    fn name(&self) -> &str {
        "ssh-cluster"
    }

    fn prepare(&mut self) -> Result<(), BackendError> {
        if self.config.identity != Identity::Generate || self.key_dir.is_some() {
            return Ok(());
        }
        let dir = tempfile::Builder::new().prefix("swarmci-key").tempdir()?;
        let key = dir.path().join("id_ed25519");
        let out = Command::new(&self.config.keygen_program)
            .args(["-q", "-t", "ed25519", "-N", "", "-C", "swarmci"])
            .arg("-f")
            .arg(&key)
            .output()
            .map_err(|e| BackendError::Setup(format!("ssh-keygen: {e}")))?;
        if !out.status.success() || !key.exists() {
            return Err(BackendError::Setup(format!(
                "ssh-keygen failed: {}",
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        log::info!(
            "generated access key {}; authorize {}.pub on every host",
            key.display(),
            key.display()
        );
        self.identity_file = Some(key);
        self.key_dir = Some(dir);
        Ok(())
    }

    fn provision(&mut self, node_count: u32) -> Result<Allocation, BackendError> {
        if node_count == 0 {
            return Err(BackendError::InvalidRequest(
                "node_count must be >= 1".into(),
            ));
        }
        let available = self.config.hosts.len() as u32;
        if node_count > available {
            return Err(BackendError::InsufficientCapacity {
                requested: node_count,
                available,
            });
        }
        let start = Instant::now();
        let alloc_id = next_alloc_id("ssh");
        let dir = self.alloc_dir(&alloc_id);
        let hosts: Vec<String> = self.config.hosts[..node_count as usize].to_vec();

        let results: Vec<(String, SetupResult)> = thread::scope(|s| {
            let jobs: Vec<_> = hosts
                .iter()
                .map(|h| {
                    let dir = &dir;
                    let this = &*self;
                    s.spawn(move || (h.clone(), this.setup_host(h, dir)))
                })
                .collect();
            jobs.into_iter()
                .map(|j| j.join().expect("provision worker"))
                .collect()
        });

        let failed: Vec<_> = results.iter().filter(|(_, r)| r.is_err()).collect();
        if !failed.is_empty() {
            let ready: Vec<String> = results
                .iter()
                .filter(|(_, r)| r.is_ok())
                .map(|(h, _)| h.clone())
                .collect();
            let leftover = self.release_hosts(&ready, &dir);
            if !leftover.is_empty() {
                log::warn!(
                    "cleanup after failed provisioning missed: {}",
                    leftover.join(", ")
                );
            }
            for (h, r) in &failed {
                if let Err((RemoteFailure::Auth, detail)) = r {
                    return Err(BackendError::AuthFailure {
                        host: h.clone(),
                        detail: detail.clone(),
                    });
                }
            }
            if failed
                .iter()
                .any(|(_, r)| matches!(r, Err((RemoteFailure::Timeout, _))))
            {
                return Err(BackendError::ProvisionTimeout {
                    after: start.elapsed(),
                });
            }
            let detail = failed
                .iter()
                .map(|(h, r)| match r {
                    Err((_, msg)) => format!("{h}: {msg}"),
                    Ok(()) => unreachable!(),
                })
                .collect::<Vec<_>>()
                .join("; ");
            return Err(BackendError::ProvisionFailed(detail));
        }

        let elapsed = start.elapsed();
        log::info!(
            "ssh allocation {alloc_id}: {} in {elapsed:.1?}",
            hosts.join(", ")
        );
        self.live.insert(alloc_id.clone(), hosts.clone());
        Ok(Allocation {
            alloc_id,
            node_handles: hosts,
            provision_wall_time: elapsed,
        })
    }

    fn launch(
        &mut self,
        alloc: &Allocation,
        req: &LaunchRequest,
    ) -> Result<LaunchResult, BackendError> {
        if !self.live.contains_key(&alloc.alloc_id) {
            return Err(BackendError::InvalidRequest(format!(
                "allocation {} is not live",
                alloc.alloc_id
            )));
        }
        req.check(alloc)?;
        let script = std::fs::read(&req.script).map_err(|e| {
            BackendError::LaunchFailure(format!("cannot read {}: {e}", req.script.display()))
        })?;
        let name = req
            .script
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run.sh".into());
        let dir = self.alloc_dir(&alloc.alloc_id);
        let head = &alloc.node_handles[0];
        let nodes = &alloc.node_handles[..req.point.nodes() as usize];

        let remote_script = format!("{dir}/{name}");
        let up = self.control(
            head,
            &format!("cat > {p} && chmod +x {p}", p = sh_quote(&remote_script)),
            &script,
        )?;
        if classify(&up).is_some() {
            return Err(BackendError::LaunchFailure(format!(
                "upload to {head} failed: {}",
                up.stderr.trim()
            )));
        }
        let hostfile = format!("{dir}/hostfile.{}", req.point.label());
        let mut ranks = place_ranks(req.point.total_procs(), nodes).join("\n");
        ranks.push('\n');
        let up = self.control(
            head,
            &format!("cat > {}", sh_quote(&hostfile)),
            ranks.as_bytes(),
        )?;
        if classify(&up).is_some() {
            return Err(BackendError::LaunchFailure(format!(
                "hostfile upload to {head} failed: {}",
                up.stderr.trim()
            )));
        }

        let mut env = req.swarm_env();
        env.insert("SWARM_HOSTS".into(), nodes.join(","));
        env.insert("SWARM_HOSTFILE".into(), hostfile);
        let assignments: Vec<String> = env
            .iter()
            .map(|(k, v)| format!("{k}={}", sh_quote(v)))
            .collect();
        let remote = format!(
            "cd {} && env {} {}",
            sh_quote(&dir),
            assignments.join(" "),
            sh_quote(&remote_script)
        );
        let outcome = process::run_captured(
            self.ssh(head, &remote),
            &req.output_sink,
            req.append,
            req.timeout,
            self.grace,
            req.cancel.as_ref(),
        )
        .map_err(|e| BackendError::LaunchFailure(format!("ssh: {e}")))?;
        Ok(LaunchResult {
            exit_code: outcome.exit_code,
            wall_time: outcome.wall_time,
            timed_out: outcome.timed_out,
            output_path: req.output_sink.clone(),
        })
    }

    fn teardown(&mut self, alloc: &Allocation) -> Result<(), BackendError> {
        let Some(hosts) = self.live.remove(&alloc.alloc_id) else {
            return Ok(());
        };
        let dir = self.alloc_dir(&alloc.alloc_id);
        let unreachable = self.release_hosts(&hosts, &dir);
        if unreachable.is_empty() {
            log::info!("ssh allocation {} released", alloc.alloc_id);
            Ok(())
        } else {
            Err(BackendError::TeardownPartial { unreachable })
        }
    }

    fn clock(&self) -> Arc<dyn Clock> {
        self.clock.clone()
    }
}

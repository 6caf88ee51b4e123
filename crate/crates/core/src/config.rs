//! Task file (`beefile`) parsing and validation.
//!
//! The document layout follows the classic BEE task file:
//!
//! ```json
//! {
//!   "task_conf": {
//!     "task_name": "flecsale",
//!     "exec_target": "simulated",
//!     "scalability_test": {
//!       "script": "run.sh",
//!       "num_of_nodes": [1, 32],
//!       "proc_per_node": [1, 16],
//!       "mode": "log"
//!     }
//!   },
//!   "docker_conf": { "docker_img_tag": "org/app:latest" },
//!   "exec_env_conf": { "seed": 7 }
//! }
//! ```
//!
//! `exec_env_conf` is handed to the selected backend unchanged. Unknown keys
//! at the top level or inside `task_conf` are kept and reported as warnings.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::backend;
use crate::planner;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("range error at {path}: {message}")]
    RangeError { path: String, message: String },
    #[error("unknown backend {name:?} (known: {})", ExecTarget::KNOWN.join(", "))]
    UnknownBackend { name: String },
}

fn schema(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::SchemaViolation {
        path: path.to_string(),
        message: message.into(),
    }
}

fn range_err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::RangeError {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Backend selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ExecTarget {
    Simulated,
    SshCluster,
}

impl ExecTarget {
    pub const KNOWN: &'static [&'static str] = &["simulated", "ssh-cluster"];

    pub fn name(&self) -> &'static str {
        match self {
            ExecTarget::Simulated => "simulated",
            ExecTarget::SshCluster => "ssh-cluster",
        }
    }
}

impl fmt::Display for ExecTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExecTarget {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulated" => Ok(ExecTarget::Simulated),
            "ssh-cluster" => Ok(ExecTarget::SshCluster),
            other => Err(ConfigError::UnknownBackend {
                name: other.to_string(),
            }),
        }
    }
}

/// Inclusive integer range `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IntRange {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScalingMode {
    Linear { step: u32 },
    Log2,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalabilitySpec {
    pub script: PathBuf,
    pub num_of_nodes: IntRange,
    pub proc_per_node: IntRange,
    pub mode: ScalingMode,
    /// Runs per scale point; the median run is reported. Defaults to 1.
    pub repeats: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigWarning {
    pub path: String,
    pub message: String,
}

/// A parsed, validated task file.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task_name: String,
    pub exec_target: ExecTarget,
    pub image_ref: String,
    pub scalability: ScalabilitySpec,
    /// Optional developer-supplied output parser executable.
    pub output_parser: Option<PathBuf>,
    /// Backend-specific block (`exec_env_conf`), validated by the backend.
    pub backend_conf: Map<String, Value>,
    /// `docker_conf` keys other than `docker_img_tag`.
    pub docker_extra: Map<String, Value>,
    pub task_conf_extra: Map<String, Value>,
    pub extra: Map<String, Value>,
    pub warnings: Vec<ConfigWarning>,
}

/// A backend configuration defect with a JSON-path locator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub path: String,
    pub message: String,
}

impl Finding {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

const TOP_LEVEL_KEYS: &[&str] = &["task_conf", "docker_conf", "exec_env_conf"];
const TASK_CONF_KEYS: &[&str] = &[
    "task_name",
    "exec_target",
    "scalability_test",
    "output_parser",
];
const SCALABILITY_KEYS: &[&str] = &[
    "script",
    "num_of_nodes",
    "proc_per_node",
    "mode",
    "step",
    "repeats",
];

pub fn parse_taskspec(raw: &[u8]) -> Result<TaskSpec, ConfigError> {
    let doc: Value =
        serde_json::from_slice(raw).map_err(|e| ConfigError::MalformedJson(e.to_string()))?;
    let root = doc
        .as_object()
        .ok_or_else(|| schema("$", "document must be a JSON object"))?;

    let mut warnings = Vec::new();
    let extra = split_unknown(root, TOP_LEVEL_KEYS, "$", &mut warnings);

    let task_conf = require_object(root, "task_conf", "$")?;
    let task_conf_extra = split_unknown(task_conf, TASK_CONF_KEYS, "$.task_conf", &mut warnings);

    let task_name = require_str(task_conf, "task_name", "$.task_conf")?;
    if task_name.is_empty() {
        return Err(schema("$.task_conf.task_name", "must not be empty"));
    }
    if task_name.chars().any(char::is_whitespace) {
        return Err(schema(
            "$.task_conf.task_name",
            "must not contain whitespace",
        ));
    }
    if task_name.contains('/') || task_name == "." || task_name == ".." {
        return Err(schema(
            "$.task_conf.task_name",
            "must be usable as a directory name",
        ));
    }

    let exec_target: ExecTarget = require_str(task_conf, "exec_target", "$.task_conf")?.parse()?;

    let output_parser = match task_conf.get("output_parser") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
        Some(_) => {
            return Err(schema(
                "$.task_conf.output_parser",
                "expected a nonempty string",
            ))
        }
    };

    let scal = require_object(task_conf, "scalability_test", "$.task_conf")?;
    let scalability = parse_scalability(scal)?;

    let (image_ref, docker_extra) = match root.get("docker_conf") {
        None | Some(Value::Null) => (String::new(), Map::new()),
        Some(Value::Object(dc)) => {
            let image = match dc.get("docker_img_tag") {
                None | Some(Value::Null) => String::new(),
                Some(Value::String(s)) => s.clone(),
                Some(_) => return Err(schema("$.docker_conf.docker_img_tag", "expected a string")),
            };
            let mut rest = dc.clone();
            rest.remove("docker_img_tag");
            (image, rest)
        }
        Some(_) => return Err(schema("$.docker_conf", "expected an object")),
    };

    let backend_conf = match root.get("exec_env_conf") {
        None | Some(Value::Null) => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(schema("$.exec_env_conf", "expected an object")),
    };

    Ok(TaskSpec {
        task_name: task_name.to_string(),
        exec_target,
        image_ref,
        scalability,
        output_parser,
        backend_conf,
        docker_extra,
        task_conf_extra,
        extra,
        warnings,
    })
}

fn parse_scalability(scal: &Map<String, Value>) -> Result<ScalabilitySpec, ConfigError> {
    const BASE: &str = "$.task_conf.scalability_test";
    if let Some(k) = scal
        .keys()
        .find(|k| !SCALABILITY_KEYS.contains(&k.as_str()))
    {
        return Err(schema(&format!("{BASE}.{k}"), "unknown field"));
    }
    let script = require_str(scal, "script", BASE)?;
    if script.is_empty() {
        return Err(schema(&format!("{BASE}.script"), "must not be empty"));
    }
    let num_of_nodes = parse_range(scal, "num_of_nodes", BASE)?;
    let proc_per_node = parse_range(scal, "proc_per_node", BASE)?;

    let step =
        match scal.get("step") {
            None => None,
            Some(v) => Some(as_count(v).ok_or_else(|| {
                schema(&format!("{BASE}.step"), "expected a non-negative integer")
            })?),
        };
    let mode = match require_str(scal, "mode", BASE)? {
        "linear" => {
            let step = step.unwrap_or(1);
            if step < 1 {
                return Err(range_err(
                    &format!("{BASE}.step"),
                    "linear step must be >= 1",
                ));
            }
            ScalingMode::Linear { step }
        }
        "log" | "log2" => {
            if step.is_some() {
                return Err(schema(
                    &format!("{BASE}.step"),
                    "step only applies to linear mode",
                ));
            }
            ScalingMode::Log2
        }
        other => {
            return Err(schema(
                &format!("{BASE}.mode"),
                format!("expected \"linear\" or \"log\", got {other:?}"),
            ))
        }
    };

    let repeats = match scal.get("repeats") {
        None => 1,
        Some(v) => {
            let r = as_count(v).ok_or_else(|| {
                schema(
                    &format!("{BASE}.repeats"),
                    "expected a non-negative integer",
                )
            })?;
            if r < 1 {
                return Err(range_err(&format!("{BASE}.repeats"), "must be >= 1"));
            }
            r
        }
    };

    Ok(ScalabilitySpec {
        script: PathBuf::from(script),
        num_of_nodes,
        proc_per_node,
        mode,
        repeats,
    })
}

fn parse_range(obj: &Map<String, Value>, key: &str, base: &str) -> Result<IntRange, ConfigError> {
    let path = format!("{base}.{key}");
    let arr = obj
        .get(key)
        .ok_or_else(|| schema(&path, "missing required field"))?
        .as_array()
        .ok_or_else(|| schema(&path, "expected a [min, max] array"))?;
    if arr.len() != 2 {
        return Err(schema(&path, "expected exactly two elements [min, max]"));
    }
    let min = as_count(&arr[0]).ok_or_else(|| schema(&path, "expected integers"))?;
    let max = as_count(&arr[1]).ok_or_else(|| schema(&path, "expected integers"))?;
    if min < 1 {
        return Err(range_err(&path, "minimum must be >= 1"));
    }
    if min > max {
        return Err(range_err(&path, format!("min {min} exceeds max {max}")));
    }
    Ok(IntRange { min, max })
}

fn as_count(v: &Value) -> Option<u32> {
    v.as_u64().and_then(|n| u32::try_from(n).ok())
}

fn require_object<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    base: &str,
) -> Result<&'a Map<String, Value>, ConfigError> {
    let path = format!("{base}.{key}");
    obj.get(key)
        .ok_or_else(|| schema(&path, "missing required field"))?
        .as_object()
        .ok_or_else(|| schema(&path, "expected an object"))
}

fn require_str<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    base: &str,
) -> Result<&'a str, ConfigError> {
    let path = format!("{base}.{key}");
    obj.get(key)
        .ok_or_else(|| schema(&path, "missing required field"))?
        .as_str()
        .ok_or_else(|| schema(&path, "expected a string"))
}

fn split_unknown(
    obj: &Map<String, Value>,
    known: &[&str],
    base: &str,
    warnings: &mut Vec<ConfigWarning>,
) -> Map<String, Value> {
    let mut extra = Map::new();
    for (k, v) in obj {
        if !known.contains(&k.as_str()) {
            warnings.push(ConfigWarning {
                path: format!("{base}.{k}"),
                message: "unknown key ignored".into(),
            });
            extra.insert(k.clone(), v.clone());
        }
    }
    extra
}

impl TaskSpec {
    /// Serializes back into task-file layout. Unknown keys are written back
    /// where they were found.
    pub fn to_json(&self) -> Value {
        let s = &self.scalability;
        let mut scal = Map::new();
        scal.insert(
            "script".into(),
            Value::from(s.script.to_string_lossy().into_owned()),
        );
        scal.insert(
            "num_of_nodes".into(),
            Value::from(vec![s.num_of_nodes.min, s.num_of_nodes.max]),
        );
        scal.insert(
            "proc_per_node".into(),
            Value::from(vec![s.proc_per_node.min, s.proc_per_node.max]),
        );
        match s.mode {
            ScalingMode::Linear { step } => {
                scal.insert("mode".into(), Value::from("linear"));
                scal.insert("step".into(), Value::from(step));
            }
            ScalingMode::Log2 => {
                scal.insert("mode".into(), Value::from("log"));
            }
        }
        if s.repeats != 1 {
            scal.insert("repeats".into(), Value::from(s.repeats));
        }

        let mut task_conf = Map::new();
        task_conf.insert("task_name".into(), Value::from(self.task_name.clone()));
        task_conf.insert("exec_target".into(), Value::from(self.exec_target.name()));
        task_conf.insert("scalability_test".into(), Value::Object(scal));
        if let Some(p) = &self.output_parser {
            task_conf.insert(
                "output_parser".into(),
                Value::from(p.to_string_lossy().into_owned()),
            );
        }
        for (k, v) in &self.task_conf_extra {
            task_conf.insert(k.clone(), v.clone());
        }

        let mut docker = self.docker_extra.clone();
        docker.insert("docker_img_tag".into(), Value::from(self.image_ref.clone()));

        let mut root = Map::new();
        root.insert("task_conf".into(), Value::Object(task_conf));
        root.insert("docker_conf".into(), Value::Object(docker));
        root.insert(
            "exec_env_conf".into(),
            Value::Object(self.backend_conf.clone()),
        );
        for (k, v) in &self.extra {
            root.insert(k.clone(), v.clone());
        }
        Value::Object(root)
    }
}

/// Checks the backend block against the selected backend. Returns one
/// finding per defect; an empty list means the backend accepts it.
pub fn validate_backend_conf(spec: &TaskSpec) -> Vec<Finding> {
    let required = planner::expand_matrix(&spec.scalability)
        .ok()
        .and_then(|m| planner::required_nodes(&m).ok());
    match spec.exec_target {
        ExecTarget::Simulated => backend::simulated::validate_conf(&spec.backend_conf),
        ExecTarget::SshCluster => backend::ssh::validate_conf(&spec.backend_conf, required),
    }
}

//! Commit a result CSV back to the source repository and push it.
//!
//! The remote is never stored in the checkout's config: every push and fetch
//! passes the token-bearing URL on the command line, and all git output is
//! redacted before it is logged or returned.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

pub const RESULTS_SUBDIR: &str = "scalability-results";
pub const SKIP_CI_MARKER: &str = "[skip ci]";
const REDACTED: &str = "***";

/// Exact commit message for a results commit.
pub fn commit_message(build_num: &str) -> String {
    format!("BeeSwarm commit {build_num} {SKIP_CI_MARKER}")
}

/// Replaces every occurrence of every non-empty secret with `***`.
///
/// Overlapping and adjacent occurrences collapse into a single `***`. The
/// pass repeats until no secret remains, so the result is idempotent.
/// Secrets made only of `*` are ignored.
pub fn redact(text: &str, secrets: &[&str]) -> String {
    let secrets: Vec<&str> = secrets
        .iter()
        .copied()
        .filter(|s| !s.is_empty() && !s.bytes().all(|b| b == b'*'))
        .collect();
    let mut out = text.to_string();
    loop {
        let mut ranges: Vec<(usize, usize)> = Vec::new();
        for s in &secrets {
            let mut from = 0;
            while let Some(i) = out[from..].find(s) {
                let start = from + i;
                ranges.push((start, start + s.len()));
                from = start + out[start..].chars().next().map_or(1, char::len_utf8);
            }
        }
        if ranges.is_empty() {
            return out;
        }
        ranges.sort_unstable();
        let mut merged: Vec<(usize, usize)> = Vec::new();
        for (s, e) in ranges {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        let mut next = String::with_capacity(out.len());
        let mut pos = 0;
        for (s, e) in merged {
            next.push_str(&out[pos..s]);
            next.push_str(REDACTED);
            pos = e;
        }
        next.push_str(&out[pos..]);
        out = next;
    }
}

/// Where results are pushed. `Debug` never shows the token.
#[derive(Clone)]
pub struct PublishTarget {
    /// Host and path without scheme, e.g. `github.com/org/repo.git`.
    pub repo_url: String,
    pub branch: String,
    pub token: String,
    pub build_num: String,
}

impl fmt::Debug for PublishTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublishTarget")
            .field("repo_url", &self.repo_url)
            .field("branch", &self.branch)
            .field("token", &REDACTED)
            .field("build_num", &self.build_num)
            .finish()
    }
}

impl PublishTarget {
    /// `https://<token>@<repo_url>`; a leading scheme on `repo_url` is dropped.
    pub fn remote_url(&self) -> String {
        let bare = self
            .repo_url
            .strip_prefix("https://")
            .or_else(|| self.repo_url.strip_prefix("http://"))
            .unwrap_or(&self.repo_url);
        format!("https://{}@{}", self.token, bare)
    }
}

#[derive(Debug, Clone)]
pub struct PublishOptions {
    /// The CI checkout to commit in.
    pub repo_dir: PathBuf,
    pub results_subdir: PathBuf,
    /// Extra environment for every git invocation.
    pub git_env: Vec<(OsString, OsString)>,
}

impl Default for PublishOptions {
    fn default() -> Self {
        Self {
            repo_dir: PathBuf::from("."),
            results_subdir: PathBuf::from(RESULTS_SUBDIR),
            git_env: Vec::new(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PublishError {
    #[error("result file not found: {0}")]
    MissingFile(PathBuf),
    #[error("target invalid: {0}")]
    InvalidTarget(String),
    #[error("push to {branch} rejected after fetch and rebase; the branch moved or is protected: {detail}")]
    PushRejected { branch: String, detail: String },
    #[error(
        "authentication failed; check REPO_TOKEN and its write access to the branch: {detail}"
    )]
    AuthFailure { detail: String },
    #[error("git {command} failed: {detail}")]
    Git { command: String, detail: String },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Published {
    pub commit_id: String,
    /// Path of the committed file relative to the repository root.
    pub path: PathBuf,
    pub retried: bool,
}

struct Git<'a> {
    dir: &'a Path,
    env: Vec<(OsString, OsString)>,
    secrets: Vec<String>,
}

struct GitOutput {
    ok: bool,
    stdout: String,
    stderr: String,
}

impl Git<'_> {
    fn redact(&self, text: &str) -> String {
        let s: Vec<&str> = self.secrets.iter().map(String::as_str).collect();
        redact(text, &s)
    }

    fn raw(&self, args: &[&str]) -> Result<GitOutput, PublishError> {
        log::debug!("git {}", self.redact(&args.join(" ")));
        let out = Command::new("git")
            .arg("-C")
            .arg(self.dir)
            .args(args)
            .env("GIT_TERMINAL_PROMPT", "0")
            .envs(self.env.iter().map(|(k, v)| (k, v)))
            .output()
            .map_err(|e| PublishError::Io(format!("cannot run git: {e}")))?;
        let res = GitOutput {
            ok: out.status.success(),
            stdout: self.redact(&String::from_utf8_lossy(&out.stdout)),
            stderr: self.redact(&String::from_utf8_lossy(&out.stderr)),
        };
        if !res.stderr.trim().is_empty() {
            log::debug!("git: {}", res.stderr.trim());
        }
        Ok(res)
    }

    fn run(&self, args: &[&str]) -> Result<String, PublishError> {
        let out = self.raw(args)?;
        if out.ok {
            Ok(out.stdout.trim().to_string())
        } else {
            Err(PublishError::Git {
                command: args.first().copied().unwrap_or_default().to_string(),
                detail: out.stderr.trim().to_string(),
            })
        }
    }
}

enum PushOutcome {
    Pushed,
    Rejected(String),
}

fn is_auth_failure(stderr: &str) -> bool {
    let s = stderr.to_ascii_lowercase();
    [
        "authentication failed",
        "could not read username",
        "could not read password",
        "invalid username or password",
        "permission denied",
        "permission to",
        "error: 403",
        "error: 401",
    ]
    .iter()
    .any(|p| s.contains(p))
}

fn is_rejection(stderr: &str) -> bool {
    ["[rejected]", "non-fast-forward", "fetch first"]
        .iter()
        .any(|p| stderr.contains(p))
}

fn push(git: &Git, url: &str, branch: &str) -> Result<PushOutcome, PublishError> {
    let refspec = format!("HEAD:refs/heads/{branch}");
    let out = git.raw(&["push", "--porcelain", url, &refspec])?;
    if out.ok {
        return Ok(PushOutcome::Pushed);
    }
    let detail = format!("{}\n{}", out.stdout.trim(), out.stderr.trim())
        .trim()
        .to_string();
    if is_auth_failure(&out.stderr) {
        Err(PublishError::AuthFailure { detail })
    } else if is_rejection(&detail) {
        Ok(PushOutcome::Rejected(detail))
    } else {
        Err(PublishError::Git {
            command: "push".into(),
            detail,
        })
    }
}

/// Copies `file` into the results directory of the checkout, commits it
/// with [`commit_message`] and pushes `HEAD` to the target branch.
///
/// A non-fast-forward rejection triggers one fetch, rebase and retry.
pub fn publish_result(
    file: &Path,
    target: &PublishTarget,
    opts: &PublishOptions,
) -> Result<Published, PublishError> {
    if !file.is_file() {
        return Err(PublishError::MissingFile(file.to_path_buf()));
    }
    if target.branch.trim().is_empty() {
        return Err(PublishError::InvalidTarget("branch is empty".into()));
    }
    if target.repo_url.trim().is_empty() {
        return Err(PublishError::InvalidTarget(
            "repository URL is empty".into(),
        ));
    }
    let url = target.remote_url();
    let mut git = Git {
        dir: &opts.repo_dir,
        env: opts.git_env.clone(),
        secrets: vec![target.token.clone()],
    };
    git.run(&["rev-parse", "--is-inside-work-tree"])?;
    if !git.raw(&["config", "user.email"])?.ok {
        for (k, v) in [
            ("GIT_AUTHOR_NAME", "swarmci"),
            ("GIT_AUTHOR_EMAIL", "swarmci@localhost"),
            ("GIT_COMMITTER_NAME", "swarmci"),
            ("GIT_COMMITTER_EMAIL", "swarmci@localhost"),
        ] {
            git.env.push((k.into(), v.into()));
        }
    }

    let name = file
        .file_name()
        .ok_or_else(|| PublishError::MissingFile(file.to_path_buf()))?;
    let rel = opts.results_subdir.join(name);
    let dest = opts.repo_dir.join(&rel);
    let io = |e: std::io::Error| PublishError::Io(git.redact(&e.to_string()));
    std::fs::create_dir_all(dest.parent().unwrap_or(&opts.repo_dir)).map_err(io)?;
    let same = matches!(
        (file.canonicalize(), dest.canonicalize()),
        (Ok(a), Ok(b)) if a == b
    );
    if !same {
        std::fs::copy(file, &dest).map_err(io)?;
    }
    let rel_str = rel.to_string_lossy().into_owned();
    git.run(&["add", "--", &rel_str])?;
    let message = commit_message(&target.build_num);
    git.run(&[
        "commit",
        "--allow-empty",
        "--quiet",
        "-m",
        &message,
        "--",
        &rel_str,
    ])?;

    let mut retried = false;
    match push(&git, &url, &target.branch)? {
        PushOutcome::Pushed => {}
        PushOutcome::Rejected(first) => {
            log::warn!("push rejected, fetching {} and rebasing", target.branch);
            retried = true;
            git.run(&["fetch", "--quiet", &url, &target.branch])?;
            if let Err(e) = git.run(&["rebase", "--quiet", "FETCH_HEAD"]) {
                let _ = git.raw(&["rebase", "--abort"]);
                return Err(PublishError::PushRejected {
                    branch: target.branch.clone(),
                    detail: format!("{first}\nrebase failed: {e}"),
                });
            }
            if let PushOutcome::Rejected(detail) = push(&git, &url, &target.branch)? {
                return Err(PublishError::PushRejected {
                    branch: target.branch.clone(),
                    detail,
                });
            }
        }
    }
    let commit_id = git.run(&["rev-parse", "HEAD"])?;
    log::info!("published {} as {}", rel.display(), commit_id);
    Ok(Published {
        commit_id,
        path: rel,
        retried,
    })
}

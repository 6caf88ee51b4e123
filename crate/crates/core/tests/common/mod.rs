#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn write_exec(path: &Path, body: &str) {
    std::fs::write(path, body).unwrap();
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755)).unwrap();
}

pub fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(args)
        .env("GIT_AUTHOR_NAME", "tester")
        .env("GIT_AUTHOR_EMAIL", "tester@localhost")
        .env("GIT_COMMITTER_NAME", "tester")
        .env("GIT_COMMITTER_EMAIL", "tester@localhost")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "git {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

/// A bare "remote" plus a CI checkout cloned from it. The public URL
/// `https://<token>@example.invalid/project.git` resolves to the bare
/// repository through `insteadOf`, but only for the right token.
pub struct GitHarness {
    pub tmp: tempfile::TempDir,
    pub bare: PathBuf,
    pub checkout: PathBuf,
    pub token: String,
    pub repo_url: String,
    pub branch: String,
}

impl GitHarness {
    pub fn new(token: &str) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let bare = tmp.path().join("remote.git");
        let seed = tmp.path().join("seed");
        let checkout = tmp.path().join("checkout");
        git(
            tmp.path(),
            &["init", "--quiet", "--bare", "-b", "main", "remote.git"],
        );
        git(tmp.path(), &["init", "--quiet", "-b", "main", "seed"]);
        std::fs::write(seed.join("README.md"), "project\n").unwrap();
        git(&seed, &["add", "README.md"]);
        git(&seed, &["commit", "--quiet", "-m", "initial"]);
        git(&seed, &["push", "--quiet", bare.to_str().unwrap(), "main"]);
        git(
            tmp.path(),
            &["clone", "--quiet", bare.to_str().unwrap(), "checkout"],
        );
        Self {
            tmp,
            bare,
            checkout,
            token: token.into(),
            repo_url: "example.invalid/project.git".into(),
            branch: "main".into(),
        }
    }

    pub fn authenticated_url(&self) -> String {
        format!("https://{}@{}", self.token, self.repo_url)
    }

    /// `GIT_CONFIG_*` variables mapping the authenticated URL onto the bare
    /// repository, plus `extra` url rewrites.
    pub fn git_env(&self, extra: &[(String, String)]) -> Vec<(String, String)> {
        let mut maps = vec![(self.bare.display().to_string(), self.authenticated_url())];
        maps.extend(extra.iter().cloned());
        let mut env = vec![("GIT_CONFIG_COUNT".to_string(), maps.len().to_string())];
        for (i, (to, from)) in maps.into_iter().enumerate() {
            env.push((format!("GIT_CONFIG_KEY_{i}"), format!("url.{to}.insteadOf")));
            env.push((format!("GIT_CONFIG_VALUE_{i}"), from));
        }
        env
    }

    pub fn ci_env(&self, build: &str) -> BTreeMap<String, String> {
        let mut env: BTreeMap<String, String> = self.git_env(&[]).into_iter().collect();
        env.insert("REPO_TOKEN".into(), self.token.clone());
        env.insert("REPO_URL".into(), self.repo_url.clone());
        env.insert("REPO_BRANCH".into(), self.branch.clone());
        env.insert("BUILD_NUM".into(), build.into());
        env
    }

    /// Adds a commit to the remote from a separate clone.
    pub fn advance_remote(&self, name: &str) {
        let other = self.tmp.path().join(format!("other-{name}"));
        git(
            self.tmp.path(),
            &[
                "clone",
                "--quiet",
                self.bare.to_str().unwrap(),
                other.to_str().unwrap(),
            ],
        );
        std::fs::write(other.join(name), "concurrent\n").unwrap();
        git(&other, &["add", name]);
        git(
            &other,
            &["commit", "--quiet", "-m", &format!("concurrent {name}")],
        );
        git(&other, &["push", "--quiet", "origin", "main"]);
    }

    pub fn remote_log(&self) -> Vec<String> {
        git(&self.bare, &["log", "--format=%s", "main"])
            .lines()
            .map(String::from)
            .collect()
    }

    /// Every byte reachable in the remote: commit objects, trees and blobs.
    pub fn remote_bytes(&self) -> Vec<u8> {
        let mut all = Vec::new();
        let objects = git(&self.bare, &["rev-list", "--objects", "--all"]);
        for line in objects.lines() {
            let id = line.split_whitespace().next().unwrap();
            let out = Command::new("git")
                .arg("-C")
                .arg(&self.bare)
                .args(["cat-file", "-p", id])
                .output()
                .unwrap();
            all.extend(out.stdout);
        }
        all
    }
}

/// An HTTP endpoint that answers every request with 401, like a forge
/// rejecting a bad token. Returns its base URL.
pub fn unauthorized_http_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut s) = stream else { continue };
            let mut buf = [0u8; 4096];
            let _ = s.read(&mut buf);
            let _ = s.write_all(
                b"HTTP/1.1 401 Unauthorized\r\nWWW-Authenticate: Basic realm=\"git\"\r\nContent-Length: 0\r\nConnection: close\r\n\r\n",
            );
        }
    });
    format!("http://{addr}/")
}

pub fn contains(hay: &[u8], needle: &str) -> bool {
    hay.windows(needle.len()).any(|w| w == needle.as_bytes())
}

/// Task file for the simulated backend with a modeled workload.
pub fn sim_beefile(task: &str, nodes: [u32; 2], ppn: [u32; 2], mode: &str, conf: Value) -> Value {
    json!({
        "task_conf": {
            "task_name": task,
            "exec_target": "simulated",
            "scalability_test": {
                "script": "app.sh",
                "num_of_nodes": nodes,
                "proc_per_node": ppn,
                "mode": mode
            }
        },
        "docker_conf": { "docker_img_tag": "demo:latest" },
        "exec_env_conf": conf
    })
}

pub fn write_json(path: &Path, v: &Value) {
    std::fs::write(path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
}

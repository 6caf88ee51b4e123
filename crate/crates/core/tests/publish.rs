mod common;

use std::ffi::OsString;
use std::path::PathBuf;

use common::{contains, git, unauthorized_http_server, GitHarness};
use swarmci::planner::ScalePoint;
use swarmci::publisher::{publish_result, PublishError, PublishOptions, PublishTarget};
use swarmci::results::{write_result_csv, MetricRow, ResultTable};

const TOKEN: &str = "tok_SENTINEL_9f2c81";

fn result_file(h: &GitHarness, build: &str, value: f64) -> PathBuf {
    let dir = h.tmp.path().join("results");
    std::fs::create_dir_all(&dir).unwrap();
    let p = ScalePoint::new(2, 4).unwrap();
    let t = ResultTable::new(build, vec![MetricRow::new(p, "elapsed", value)]).unwrap();
    write_result_csv(&t, &dir).unwrap()
}

fn target(h: &GitHarness, build: &str) -> PublishTarget {
    PublishTarget {
        repo_url: h.repo_url.clone(),
        branch: h.branch.clone(),
        token: h.token.clone(),
        build_num: build.into(),
    }
}

fn opts(h: &GitHarness, env: Vec<(String, String)>) -> PublishOptions {
    PublishOptions {
        repo_dir: h.checkout.clone(),
        git_env: env
            .into_iter()
            .map(|(k, v)| (OsString::from(k), OsString::from(v)))
            .collect(),
        ..PublishOptions::default()
    }
}

#[test]
fn publish_commits_under_results_dir_with_skip_ci_message() {
    let h = GitHarness::new(TOKEN);
    let file = result_file(&h, "417", 3.5);
    let out = publish_result(&file, &target(&h, "417"), &opts(&h, h.git_env(&[]))).unwrap();

    assert_eq!(
        out.path,
        PathBuf::from("scalability-results/scalability_test_result_417.csv")
    );
    assert!(!out.retried);
    assert_eq!(git(&h.bare, &["rev-parse", "main"]), out.commit_id);
    assert_eq!(h.remote_log()[0], "BeeSwarm commit 417 [skip ci]");
    let raw = git(&h.bare, &["cat-file", "commit", "main"]);
    assert!(raw.ends_with("\n\nBeeSwarm commit 417 [skip ci]"), "{raw}");
    let committed = git(
        &h.bare,
        &[
            "show",
            "main:scalability-results/scalability_test_result_417.csv",
        ],
    );
    assert_eq!(
        format!("{committed}\n"),
        std::fs::read_to_string(&file).unwrap()
    );
    // no remote carrying the token is left behind in the checkout
    assert!(!contains(
        &std::fs::read(h.checkout.join(".git/config")).unwrap(),
        TOKEN
    ));
}

#[test]
fn republishing_a_build_makes_a_new_commit() {
    let h = GitHarness::new(TOKEN);
    let o = opts(&h, h.git_env(&[]));
    let first = publish_result(&result_file(&h, "9", 1.0), &target(&h, "9"), &o).unwrap();
    let second = publish_result(&result_file(&h, "9", 2.0), &target(&h, "9"), &o).unwrap();
    assert_ne!(first.commit_id, second.commit_id);
    assert_eq!(first.path, second.path);
    let log = h.remote_log();
    assert_eq!(
        &log[..2],
        ["BeeSwarm commit 9 [skip ci]", "BeeSwarm commit 9 [skip ci]"]
    );
    let files = git(&h.bare, &["ls-tree", "-r", "--name-only", "main"]);
    assert_eq!(files.lines().filter(|l| l.contains("result_9")).count(), 1);
}

#[test]
fn identical_content_still_commits() {
    let h = GitHarness::new(TOKEN);
    let o = opts(&h, h.git_env(&[]));
    let file = result_file(&h, "5", 1.0);
    let a = publish_result(&file, &target(&h, "5"), &o).unwrap();
    let b = publish_result(&file, &target(&h, "5"), &o).unwrap();
    assert_ne!(a.commit_id, b.commit_id);
}

#[test]
fn concurrent_push_is_rebased_and_retried_once() {
    let h = GitHarness::new(TOKEN);
    h.advance_remote("other.txt");
    let out = publish_result(
        &result_file(&h, "12", 1.0),
        &target(&h, "12"),
        &opts(&h, h.git_env(&[])),
    )
    .unwrap();
    assert!(out.retried);
    let log = h.remote_log();
    assert_eq!(log[0], "BeeSwarm commit 12 [skip ci]");
    assert_eq!(log[1], "concurrent other.txt");
    assert_eq!(git(&h.bare, &["rev-parse", "main"]), out.commit_id);
}

#[test]
fn second_rejection_surfaces() {
    let h = GitHarness::new(TOKEN);
    // fetches see the stale remote, pushes go to one that has moved on
    let diverged = h.tmp.path().join("diverged.git");
    git(
        h.tmp.path(),
        &[
            "clone",
            "--quiet",
            "--bare",
            h.bare.to_str().unwrap(),
            "diverged.git",
        ],
    );
    let mover = h.tmp.path().join("mover");
    git(
        h.tmp.path(),
        &["clone", "--quiet", diverged.to_str().unwrap(), "mover"],
    );
    std::fs::write(mover.join("x"), "x").unwrap();
    git(&mover, &["add", "x"]);
    git(&mover, &["commit", "--quiet", "-m", "moved"]);
    git(&mover, &["push", "--quiet", "origin", "main"]);

    let mut env = h.git_env(&[]);
    env[0].1 = "2".into();
    env.push((
        "GIT_CONFIG_KEY_1".into(),
        format!("url.{}.pushInsteadOf", diverged.display()),
    ));
    env.push(("GIT_CONFIG_VALUE_1".into(), h.authenticated_url()));
    let err =
        publish_result(&result_file(&h, "3", 1.0), &target(&h, "3"), &opts(&h, env)).unwrap_err();
    match &err {
        PublishError::PushRejected { branch, .. } => assert_eq!(branch, "main"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(!err.to_string().contains(TOKEN));
}

#[test]
fn detached_head_pushes_to_branch() {
    let h = GitHarness::new(TOKEN);
    git(&h.checkout, &["checkout", "--quiet", "--detach"]);
    let out = publish_result(
        &result_file(&h, "21", 1.0),
        &target(&h, "21"),
        &opts(&h, h.git_env(&[])),
    )
    .unwrap();
    assert_eq!(git(&h.bare, &["rev-parse", "main"]), out.commit_id);
}

#[test]
fn wrong_token_is_auth_failure_and_redacted() {
    let h = GitHarness::new("tok_WRONG_55d0e1");
    let server = unauthorized_http_server();
    // anything not matching the right token lands on the 401 endpoint,
    // keeping the token inside the request path
    let env = vec![
        ("GIT_CONFIG_COUNT".to_string(), "1".to_string()),
        (
            "GIT_CONFIG_KEY_0".to_string(),
            format!("url.{server}.insteadOf"),
        ),
        ("GIT_CONFIG_VALUE_0".to_string(), "https://".to_string()),
    ];
    let err =
        publish_result(&result_file(&h, "8", 1.0), &target(&h, "8"), &opts(&h, env)).unwrap_err();
    assert!(matches!(err, PublishError::AuthFailure { .. }), "{err:?}");
    let text = format!("{err} {err:?}");
    assert!(!text.contains("tok_WRONG_55d0e1"), "{text}");
    assert_eq!(h.remote_log(), vec!["initial".to_string()]);
}

#[test]
fn missing_file() {
    let h = GitHarness::new(TOKEN);
    let err = publish_result(
        &h.tmp.path().join("absent.csv"),
        &target(&h, "1"),
        &opts(&h, h.git_env(&[])),
    )
    .unwrap_err();
    assert!(matches!(err, PublishError::MissingFile(_)));
}

// Push a result file into a repository, using a local bare repository as
// the remote.
//
// The token-bearing URL `https://<token>@example.invalid/demo.git` is
// rewritten onto the bare repository with git's `insteadOf`, passed through
// `GIT_CONFIG_*` variables so nothing is written to any config file.

use std::error::Error;
use std::path::Path;
use std::process::Command;

use swarmci::planner::ScalePoint;
use swarmci::publisher::{publish_result, PublishOptions, PublishTarget};
use swarmci::results::{write_result_csv, MetricRow, ResultTable};

fn git(dir: &Path, args: &[&str]) -> Result<String, Box<dyn Error>> {
    let out = Command::new("git").arg("-C").arg(dir).args(args).output()?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned().into());
    }
    Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let tmp = tempfile::tempdir()?;
    let remote = tmp.path().join("remote.git");
    let checkout = tmp.path().join("checkout");
    git(tmp.path(), &["init", "--quiet", "--bare", "remote.git"])?;
    git(tmp.path(), &["init", "--quiet", "checkout"])?;

    let token = "ghp_exampletoken";
    let target = PublishTarget {
        repo_url: "example.invalid/demo.git".into(),
        branch: "main".into(),
        token: token.into(),
        build_num: "417".into(),
    };
    let opts = PublishOptions {
        repo_dir: checkout.clone(),
        git_env: vec![
            ("GIT_CONFIG_COUNT".into(), "1".into()),
            (
                "GIT_CONFIG_KEY_0".into(),
                format!("url.{}.insteadOf", remote.display()).into(),
            ),
            ("GIT_CONFIG_VALUE_0".into(), target.remote_url().into()),
        ],
        ..PublishOptions::default()
    };

    let p: ScalePoint = "2x4".parse()?;
    let table = ResultTable::new("417", vec![MetricRow::new(p, "elapsed", 12.5)])?;
    let csv = write_result_csv(&table, tmp.path())?;

    let published = publish_result(&csv, &target, &opts)?;
    println!(
        "pushed {} as {}",
        published.path.display(),
        published.commit_id
    );
    println!(
        "remote log: {}",
        git(&remote, &["log", "--format=%s", "main"])?
    );
    println!(
        "remote tree: {}",
        git(&remote, &["ls-tree", "-r", "--name-only", "main"])?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

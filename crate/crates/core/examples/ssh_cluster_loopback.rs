// The SSH cluster backend against a loopback `ssh` shim.
//
// The shim accepts the usual ssh options, ignores the host and runs the
// remote command locally, so the example exercises provisioning, script
// upload, hostfile placement and teardown without any real machines.

use std::error::Error;
use std::os::unix::fs::PermissionsExt;
use std::path::Path;

use swarmci::backend::ssh::{place_ranks, SshBackend, SshConfig};
use swarmci::backend::{Backend, LaunchRequest};
use swarmci::planner::ScalePoint;

const SHIM: &str = r#"#!/bin/sh
while [ $# -gt 0 ]; do
  case "$1" in
    -o|-p|-i|-l) shift 2 ;;
    -*) shift ;;
    *) break ;;
  esac
done
shift
exec sh -c "$*"
"#;

const APP: &str = r#"#!/bin/sh
echo "ranks=$SWARM_TOTAL_PROCS"
sort "$SWARM_HOSTFILE" | uniq -c | awk '{ print "slots_" $2 "=" $1 }'
echo "elapsed=1.5"
"#;

fn executable(path: &Path, body: &str) -> std::io::Result<()> {
    std::fs::write(path, body)?;
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755))
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let tmp = tempfile::tempdir()?;
    let shim = tmp.path().join("ssh");
    let app = tmp.path().join("app.sh");
    executable(&shim, SHIM)?;
    executable(&app, APP)?;

    let hosts: Vec<String> = ["node-a", "node-b", "node-c"].map(String::from).to_vec();
    println!("rank placement for 5 ranks: {:?}", place_ranks(5, &hosts));

    let mut config = SshConfig::new(hosts);
    config.ssh_program = shim;
    config.stage_image = false;
    config.workdir = tmp.path().join("remote").display().to_string();
    let mut backend = SshBackend::new(config, "demo:latest");

    backend.prepare()?;
    let alloc = backend.provision(2)?;
    println!("allocation {} on {:?}", alloc.alloc_id, alloc.node_handles);
    let point = ScalePoint::new(2, 3).ok_or("bad point")?;
    let out = tmp.path().join("2x3.out");
    let result = backend.launch(&alloc, &LaunchRequest::new(point, &app, &out))?;
    println!("exit {} in {:?}", result.exit_code, result.wall_time);
    print!("{}", std::fs::read_to_string(&out)?);
    backend.teardown(&alloc)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

// Run a whole job on the simulated backend and inspect the backend calls.
//
// The backend models a strong-scaling workload, `T(p) = t1 * (s + (1 - s) / p)`,
// and a near-constant provisioning delay on a virtual clock, so the job
// finishes instantly while reporting realistic stage times.

use std::error::Error;

use swarmci::backend::simulated::{SimConfig, SimulatedBackend, WorkloadModel};
use swarmci::backend::{CallLog, Recorded};
use swarmci::config::parse_taskspec;
use swarmci::executor::{run_job, RunOptions};
use swarmci::planner::expand_matrix;
use swarmci::results::parse_key_value_dir;

const BEEFILE: &str = r#"{
  "task_conf": {
    "task_name": "sim-demo",
    "exec_target": "simulated",
    "scalability_test": {
      "script": "unused.sh",
      "num_of_nodes": [1, 4],
      "proc_per_node": [1, 8],
      "mode": "log2"
    }
  },
  "docker_conf": { "docker_img_tag": "demo:latest" },
  "exec_env_conf": {}
}"#;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let spec = parse_taskspec(BEEFILE.as_bytes())?;
    let matrix = expand_matrix(&spec.scalability)?;

    let config = SimConfig {
        workload: Some(WorkloadModel {
            t1_s: 64.0,
            serial_fraction: 0.05,
            metric: "elapsed".into(),
        }),
        ..SimConfig::default()
    };
    let log = CallLog::new();
    let mut backend = Recorded::new(SimulatedBackend::new(config), log.clone());

    let out = tempfile::tempdir()?;
    let opts = RunOptions {
        output_root: out.path().to_path_buf(),
        ..RunOptions::default()
    };
    let report = run_job(&mut backend, &spec, &matrix, &opts)?;
    for r in &report.records {
        println!(
            "{:<6} exit {:>3}  {:>8.3}s",
            r.point.label(),
            r.result.exit_code,
            r.result.wall_time.as_secs_f64()
        );
    }
    println!(
        "provisions {:?}, launches {}, teardowns {}",
        log.provisions(),
        log.launches(),
        log.teardowns()
    );
    println!(
        "modeled provisioning {:.0}s, execution {:.0}s",
        report.timings.provision_s, report.timings.execute_s
    );

    let table = parse_key_value_dir(&report.output_dir, "1")?;
    print!("{}", table.to_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

// Where a job's time goes: install, provision, execute, collect, publish.
//
// Uses the default provisioning model of the simulated backend, which
// dominates short jobs just as real cluster setup does.

use std::error::Error;
use std::time::Instant;

use swarmci::backend::simulated::{SimConfig, SimulatedBackend, WorkloadModel};
use swarmci::config::parse_taskspec;
use swarmci::executor::{render_stage_report, run_job, RunOptions};
use swarmci::planner::expand_matrix;
use swarmci::results::{parse_key_value_dir, write_result_csv};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let spec = parse_taskspec(
        br#"{"task_conf": {"task_name": "stages", "exec_target": "simulated",
              "scalability_test": {"script": "x", "num_of_nodes": [1, 16],
                                   "proc_per_node": [1, 64], "mode": "log2"}},
             "docker_conf": {"docker_img_tag": "demo"}}"#,
    )?;
    let matrix = expand_matrix(&spec.scalability)?;
    let mut backend = SimulatedBackend::new(SimConfig {
        workload: Some(WorkloadModel::perfect(30.0)),
        ..SimConfig::default()
    });

    let dir = tempfile::tempdir()?;
    let opts = RunOptions {
        output_root: dir.path().join("outputs"),
        ..RunOptions::default()
    };
    let mut report = run_job(&mut backend, &spec, &matrix, &opts)?;

    let started = Instant::now();
    let table = parse_key_value_dir(&report.output_dir, "7")?;
    write_result_csv(&table, dir.path())?;
    report.timings.collect_s = started.elapsed().as_secs_f64();

    let stages = render_stage_report(&report.timings);
    print!("{}", stages.to_table());
    println!("largest stage: {}", stages.largest().stage);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

// Expand a task file into its run matrix.
//
//     cargo run --example plan_matrix
//     cargo run --example plan_matrix -- path/to/beefile.json

use std::error::Error;
use std::path::{Path, PathBuf};

use swarmci::config::parse_taskspec;
use swarmci::planner::{expand_matrix, required_nodes};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    plan(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data/listing.beefile.json"))
}

fn plan(path: &Path) -> Result<(), Box<dyn Error>> {
    let spec = parse_taskspec(&std::fs::read(path)?)?;
    for w in &spec.warnings {
        println!("warning: {}: {}", w.path, w.message);
    }

    let matrix = expand_matrix(&spec.scalability)?;
    println!("{}: {} scale points", spec.task_name, matrix.len());
    print!("{}", matrix.to_table());
    println!("provision once at {} node(s)", required_nodes(&matrix)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    match std::env::args_os().nth(1) {
        Some(path) => plan(Path::new(&path)),
        None => run_example(),
    }
}

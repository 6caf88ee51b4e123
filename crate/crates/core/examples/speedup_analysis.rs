// Speedup per node count from a result table.

use std::error::Error;

use swarmci::planner::ScalePoint;
use swarmci::results::{compute_speedup, speedup_by_nodes, ResultTable};

const CSV: &str = "\
nodes,procs_per_node,total_procs,metric,value
1,1,1,elapsed,96.0
1,2,2,elapsed,50.1
1,4,4,elapsed,26.4
1,8,8,elapsed,14.9
2,1,2,elapsed,51.0
2,2,4,elapsed,27.2
2,4,8,elapsed,15.8
2,8,16,elapsed,10.3
";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let table = ResultTable::from_csv("12", CSV)?;

    // each node count against its own smallest run
    for g in speedup_by_nodes(&table, "elapsed", None)? {
        let (lo, hi) = g.range().unwrap_or((1.0, 1.0));
        println!("{} node(s) vs {}: {lo:.2}x - {hi:.2}x", g.nodes, g.baseline);
    }

    // everything against the serial run
    let serial: ScalePoint = "1x1".parse()?;
    for (p, s) in compute_speedup(&table, "elapsed", serial)? {
        println!("{:<5} {s:>6.2}x", p.label());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

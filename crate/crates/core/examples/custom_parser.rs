// Turn run outputs into a result table with a developer-supplied parser.
//
// The parser is any executable. It receives the output directory as its
// only argument and prints the result CSV on stdout.

use std::error::Error;
use std::os::unix::fs::PermissionsExt;

use swarmci::results::{invoke_parser, write_result_csv};

const PARSER: &str = r#"#!/bin/sh
echo nodes,procs_per_node,total_procs,metric,value
for f in "$1"/*.out; do
  b=$(basename "$f" .out); n=${b%x*}; p=${b#*x}
  awk -v n="$n" -v p="$p" '/^Total time:/ { print n "," p "," n*p ",elapsed," $3 }
                          /^Cycles:/     { print n "," p "," n*p ",cycles," $2 }' "$f"
done
"#;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let tmp = tempfile::tempdir()?;
    let outputs = tmp.path().join("outputs");
    std::fs::create_dir(&outputs)?;
    for (label, secs) in [("1x1", 88.2), ("1x2", 45.0), ("2x2", 23.7)] {
        std::fs::write(
            outputs.join(format!("{label}.out")),
            format!("Cycles: 1200\nTotal time: {secs} s\n"),
        )?;
    }
    let parser = tmp.path().join("parse_output.sh");
    std::fs::write(&parser, PARSER)?;
    std::fs::set_permissions(&parser, std::fs::Permissions::from_mode(0o755))?;

    let table = invoke_parser(&parser, &outputs, "58")?;
    let path = write_result_csv(&table, tmp.path())?;
    println!(
        "{}:",
        path.file_name().unwrap_or_default().to_string_lossy()
    );
    print!("{}", std::fs::read_to_string(path)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

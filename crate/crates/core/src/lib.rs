//! Scalability testing for CI pipelines.
//!
//! A JSON task file declares node and process-per-node ranges. The crate
//! expands them into a run matrix, provisions a backend once at the largest
//! node count, runs every scale point, turns the captured outputs into a
//! build-numbered CSV, and pushes that CSV back to the source repository
//! with a commit that does not retrigger CI.
//!
//! The pipeline stages map onto modules:
//!
//! - [`config`]: parse and validate the task file
//! - [`planner`]: expand ranges into a [`planner::RunMatrix`]
//! - [`backend`]: provisioning and launch (simulated and SSH cluster)
//! - [`executor`]: drive a whole job and account stage timings
//! - [`results`]: parser handshake, result CSV, speedup, regressions
//! - [`publisher`]: commit and push results
//! - [`cli`]: the `swarmci` command line

pub mod backend;
pub mod cli;
pub mod config;
pub mod executor;
pub mod planner;
pub mod publisher;
pub mod results;

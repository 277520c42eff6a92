//! Benchmark harness behind the `powerlin` binary: runs the full
//! linearize → OPF → AC-validation → metrics pipeline over a
//! (method, case) matrix, emits reports in three formats, scores the
//! methods on the four radar axes, and hosts the brute-force oracle used
//! as a desk-scale reference optimum.

pub mod config;
pub mod harness;
pub mod oracle;
pub mod radar;
pub mod report;

pub use config::{EpsFSource, OutputFormat, Parallelism, RunConfig};
pub use harness::run_benchmark;
pub use report::BenchmarkReport;

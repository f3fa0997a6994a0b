//! Harness around `forrelation-core`: file formats, netlists, reports, a
//! thread-pool executor, subprocess adversaries and the `forrel` CLI.

pub mod cli;
pub mod exec;
pub mod external;
pub mod formats;
pub mod netlist;
pub mod report;

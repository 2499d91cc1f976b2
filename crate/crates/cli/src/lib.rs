//! File formats, report serialization and the parallel simulation runner
//! behind the `sciss` command-line tool.

pub mod dataset;
pub mod error;
pub mod report;
pub mod runner;
pub mod summary;

pub use error::CliError;

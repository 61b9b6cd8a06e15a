//! Scenario files, benchmark orchestration and reports for the `mocc`
//! command-line tool.

pub mod config;
pub mod report;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, Scenario};
pub use report::PerformanceReport;
pub use run::{run_benchmark, write_report, Overrides};

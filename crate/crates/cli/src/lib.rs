//! Configuration, orchestration, and reporting for upcrossing experiments:
//! declarative TOML configs in, CSV/JSON artifacts and reproduction bundles
//! out.

pub mod config;
pub mod report;
pub mod runner;

//! Command-line front end: CSV ingestion, fit orchestration and the
//! `fit.json`/CSV/SVG artifacts.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod ingest;
pub mod plot;
pub mod run;
pub mod simulate;
pub mod summarize;

pub use artifacts::{FitReport, Status};
pub use config::{Method, RunConfig};
pub use error::{CliError, Result};
pub use run::{execute, prepare, run, Prepared, RunOutcome};

//! Scenario runner for the lipdiff toolkit: loads a JSON scenario, runs the
//! requested pipeline and emits a JSON report plus CSV profiles.
//!
//! Exit codes: 0 certified or pass, 2 refuted, 3 inconclusive, 1 error.

pub mod error;
pub mod report;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use report::{emit_profiles, ReportEnvelope, TOOLKIT_VERSION};
pub use run::{run, Outcome, PipelineReport, Verdict};
pub use scenario::{load_scenario, parse_scenario, LoadedScenario, Pipeline, Scenario, SCHEMA};

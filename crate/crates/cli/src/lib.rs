//! Declarative scenario runner for the heralded optomechanics engines.
//!
//! A configuration document lists scenarios; each scenario sweeps a parameter
//! grid for one protocol and writes one CSV per requested output plus a JSON
//! manifest.

pub mod bundled;
pub mod error;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use run::{
    evaluate_point, herald_at, run_document, run_scenario, validate_document, wigner_at,
    HeraldedState, PointOutcome, RunSummary, ValidationTable,
};
pub use scenario::{
    Axis, AxisName, ConfigDocument, OutputKind, ProtocolKind, Scale, Scenario, SCHEMA_VERSION,
};

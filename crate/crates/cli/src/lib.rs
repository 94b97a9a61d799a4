//! Ensemble harness, config handling, and artifact IO for the
//! growing-choice preferential-attachment simulator. The `growchoice`
//! binary in this crate is a thin orchestrator over these modules.

pub mod config;
pub mod harness;
pub mod report;

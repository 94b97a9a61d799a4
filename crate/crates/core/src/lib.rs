//! Core routines for simulating random graph growth by preferential
//! attachment with sublinear weights and a growing number of choices.
//!
//! The model: at step `n + 1` a new vertex joins the graph with a random
//! number of edges `m`. Each edge independently samples `d = c_d * (n+1)^gamma`
//! candidate endpoints with probability proportional to `deg^alpha` and
//! attaches to the candidate of maximal degree. Depending on whether
//! `alpha + gamma` is below, at, or above 1, the maximum degree grows
//! polynomially, linearly with a nontrivial slope, or captures essentially
//! every edge.
//!
//! The crate is `no_std` (alloc required); all float math goes through
//! `libm`, which also keeps simulation output bit-stable across platforms.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod engine;
mod fenwick;
pub mod index;
pub mod params;
pub mod stats;
pub mod theory;

pub use engine::{GraphState, RunFailure, RunTrace, StepOutcome, TraceRow, TraceSpec};
pub use index::{DegreeClassIndex, IndexError, VertexId};
pub use params::{
    DRounding, MDistribution, MKind, ModelParams, ParamError, SamplerMode, ValidationReport,
    Violation, Warning,
};
pub use theory::{DriftBounds, Prediction, Regime, TheoryError};

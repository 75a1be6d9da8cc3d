//! Discrete factor-graph inference: loopy belief propagation, gauge
//! diagnostics, holonomy-aware tree compilation and brute-force oracles.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod bp;
pub mod compile;
pub mod error;
pub mod factor_graph;
pub mod generators;
pub mod holonomy;
pub mod io;
pub mod metrics;
pub mod nerve;
pub mod oracle;
pub mod potential;
pub mod scalar;
pub mod sectors;
pub mod semiring;

pub use error::{GraphError, Violation};
pub use factor_graph::{FactorDecl, FactorGraph, GraphBuilder, VariableDecl};
pub use potential::PotentialSlice;
pub use scalar::Scalar;
pub use semiring::Semiring;

pub type FactorGraphF64 = FactorGraph<f64>;
pub type FactorGraphF32 = FactorGraph<f32>;
pub type PotentialSliceF64 = PotentialSlice<f64>;
pub type PotentialSliceF32 = PotentialSlice<f32>;
pub type MessageStateF64 = bp::MessageState<f64>;
pub type MessageStateF32 = bp::MessageState<f32>;

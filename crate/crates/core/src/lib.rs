//! Greedy submodular maximization over the quadratic-form embedding
//! `Δ(i | S) = u_iᵀ h(S) u_i`, with exact, batched, sketch-backed and
//! LSH-backed selection, plus brute-force oracles for testing.

pub mod error;
pub mod instance;
pub mod ipe;
pub mod linalg;
pub mod lsh;
pub mod maximizers;
pub mod oracle;
pub mod qfs;
pub mod sketch;

pub use error::{Error, Result};
pub use instance::{
    evaluate_f, marginal_gain, validate_instance, Constraint, DiversityFamily, GroundVectors,
    Instance, MarginalOracle, Matroid, PartitionMatroid, RunStats, SelectionRun, UniformMatroid,
};
pub use linalg::Matrix;

//! First-eigenvalue analysis of symmetric random sparse matrices.
//!
//! The crate covers four routes to the largest eigenvalue `Λ` of a sparse
//! symmetric matrix `J` and the statistics of its eigenvector:
//!
//! * [`oracle`]: shifted power iteration on a concrete instance (ground truth);
//! * [`cavity`]: cavity message passing on a concrete instance, exact on trees;
//! * [`population`]: population dynamics for the ensemble-level distribution
//!   of cavity fields, which locates `Λ` as the point where a non-trivial
//!   first-order field distribution survives the iteration;
//! * [`analytic`]: closed forms for the single-degree and dense limits.
//!
//! [`ensemble`] generates instances from a bounded degree distribution by
//! stub matching, and [`experiment`] wires everything into reproducible
//! sweeps driven by the `cavity-eigen` binary.

pub mod analytic;
pub mod cavity;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod histogram;
pub mod instance;
pub mod oracle;
pub mod population;
pub mod rng;
mod summation;

pub use analytic::{DenseLimitModel, Mode, SingleDegreeModel};
pub use ensemble::{CouplingLaw, DegreeDistribution, Ensemble};
pub use error::{Error, Result};
pub use histogram::{Binning, Histogram};
pub use instance::SparseSymmetricInstance;
pub use oracle::EigenSolution;
pub use population::Population;

//! Robust continuous co-clustering.
//!
//! Learns a graph-regularized representation `U` of a data matrix `X` by
//! alternating closed-form line-process updates with a matrix-free solve of a
//! symmetric diagonally dominant Sylvester system, then assigns row and
//! column clusters from the collapsed representation.
//!
//! Pipeline:
//! 1. [`graph`] builds mutual k-nearest-neighbor graphs on rows and columns.
//! 2. [`optimize`] runs the alternating minimization with graduated
//!    non-convexity (the Geman-McClure penalty, annealed through `mu`).
//! 3. [`assign`] turns the learned representation into row/column labels,
//!    branching on input sparsity between connected-component assignment and
//!    silhouette-selected k-means.
//! 4. [`metrics`] scores label agreement (NMI/AMI/ARI).
//!
//! [`synth`] generates the block-constant benchmark datasets and [`io`]
//! handles CSV / Matrix Market / PGM files for the CLI.

pub mod assign;
pub mod cli;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod optimize;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};

/// Dense real matrix used for both the input `X` and the representation `U`.
pub type DataMatrix = ndarray::Array2<f64>;

/// Which side of the matrix an operation works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixAxis {
    Rows,
    Columns,
}

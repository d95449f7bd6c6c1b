//! Singular value thresholding for nuclear-norm minimization.
//!
//! The crate is organised bottom-up:
//!
//! - [`dense`], [`lowrank`]: dense matrices with a Jacobi SVD, and factored
//!   low-rank matrices that never need to be densified during a solve.
//! - [`sampled`]: matrices living on a fixed sampling set, with fast
//!   products against vectors.
//! - [`lanczos`]: top singular triplets by Lanczos bidiagonalization.
//! - [`shrink`]: the singular value shrinkage operator.
//! - [`solver`]: the thresholding iterations for completion, general
//!   linear equality and inequality constraints, and the matrix Dantzig
//!   selector.
//! - [`problem`], [`io`], [`bench`], [`check`]: instance generation, file
//!   formats, the benchmark presets and the invariant suite.

pub mod bench;
pub mod check;
pub mod dense;
pub mod error;
pub mod io;
pub mod lanczos;
pub mod lowrank;
pub mod par;
pub mod problem;
pub mod sampled;
pub mod shrink;
pub mod solver;

pub use dense::{svd_dense, DenseMatrix, DenseSvd};
pub use error::{Result, SvtError};
pub use lanczos::{svd_above_threshold, top_singular_triplets, LinearOperator, PartialSvdParams};
pub use lowrank::LowRankMatrix;
pub use par::Execution;
pub use problem::{generate, relative_error, GeneratedProblem, ProblemSpec};
pub use sampled::{IndexSet, SampledMatrix};
pub use shrink::{shrink_dense, shrink_sparse, ShrinkageOutcome};
pub use solver::{
    svt_complete, svt_dantzig, svt_inequality, svt_linear, SolveReport, SolveStatus, StopRule, SvtConfig,
};

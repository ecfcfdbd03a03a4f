//! Inherently sparse principal component analysis.
//!
//! The pipeline detects groups of mutually uncorrelated columns (a
//! block-diagonal covariance), ranks the groups by their share of the total
//! variance, and builds sparse, orthonormal loadings by running an SVD on
//! each group separately and zero-padding the results back to full width.
//!
//! Modules, bottom-up:
//! - [`matrix`]: data container, centering, covariance, permutations
//! - [`spectra`]: exact and cross-data-matrix spectral estimators, metrics
//! - [`detect`]: block partition detectors (oracle, correlation graph,
//!   recursive sparse splitting)
//! - [`pla`]: per-block explained variance
//! - [`model`]: the sparse PCA fit, scores and loading diagnostics
//! - [`sim`]: the compound-symmetric Monte-Carlo comparison harness
//! - [`io`] and [`cli`]: file formats and the `ispca` command line

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod cli;
pub mod detect;
pub mod error;
pub mod io;
pub mod matrix;
pub mod model;
pub mod pla;
pub mod sim;
pub mod spectra;

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
mod oracle;

pub use error::{Error, Result};
pub use matrix::{ColumnIndexSet, CovarianceMatrix, DataMatrix, Permutation};
pub use spectra::{SpectralEstimate, SvdMethod};

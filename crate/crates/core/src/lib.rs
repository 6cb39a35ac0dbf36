//! Euclidean distance matrix toolbox.
//!
//! Build, validate, complete and denoise squared-distance matrices, recover
//! point configurations from them, solve multidimensional unfolding and
//! unlabeled-distance problems, and run seeded Monte Carlo comparisons of the
//! completion methods.

pub mod completion;
pub mod edm;
pub mod embedding;
pub mod error;
pub mod harness;
pub mod io;
pub mod unfolding;
pub mod unlabeled;

pub use edm::{
    assemble_edm, cross_edm, is_edm, numerical_rank, DistanceMatrix, GramMatrix, ObservationMask,
    PointSet, ReducedGram,
};
pub use error::{EdmError, Result};

//! Concentration bounds for norms of infinitely divisible random vectors
//! with independent coordinates.
//!
//! The crate turns a coordinate Lévy measure into rate functions `h`, then
//! into tail-bound certificates `exp(-∫_0^x h^{-1})`, and checks those
//! certificates against Monte Carlo simulation of the vector.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod error;
pub mod levy;
pub mod marginal;
pub mod numerics;
pub mod pipeline;
pub mod quadrature;
pub mod rates;
pub mod sampler;
pub mod stats;
pub mod vector;
pub mod verification;

pub use certificate::{BoundCertificate, CenterStat, Centering, Direction};
pub use error::{Error, Result};
pub use levy::{CustomDensity, JumpLaw, LevyMeasure1D};
pub use numerics::{
    chernoff_bound, constrained_chernoff, find_t, invert_monotone, ChernoffValue, NumericConfig, Provenance,
    RateFunction,
};
pub use rates::{Moment, MomentSet, ProjectionSpec, ProjectionVariant};
pub use pipeline::{BoundFamily, BoundRequest, MonteCarloConfig, VERSION};
pub use sampler::TailEstimate;
pub use vector::{Coordinate, Coordinates, IdVectorSpec};
pub use verification::{BoundReport, Verdict};

//! Shared fixtures for the benchmarks in `benches/`.

use idconc::{Coordinate, IdVectorSpec, JumpLaw, LevyMeasure1D};

pub fn laplace(d: usize) -> IdVectorSpec {
    IdVectorSpec::iid(d, Coordinate::new(LevyMeasure1D::symmetric_exponential(1.0).unwrap())).unwrap()
}

pub fn poisson_atom(d: usize) -> IdVectorSpec {
    IdVectorSpec::iid(d, Coordinate::new(LevyMeasure1D::poisson_atom(1.0, 1.0).unwrap())).unwrap()
}

pub fn gamma(d: usize) -> IdVectorSpec {
    IdVectorSpec::iid(d, Coordinate::new(LevyMeasure1D::gamma_levy(1.0, 0.5).unwrap())).unwrap()
}

pub fn compound_poisson(d: usize) -> IdVectorSpec {
    let m = LevyMeasure1D::compound_poisson(1.0, JumpLaw::Uniform { lo: -1.0, hi: 1.0 }).unwrap();
    IdVectorSpec::iid(d, Coordinate::new(m)).unwrap()
}

/// Log-spaced deviation grid.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    idconc::pipeline::make_grid(lo, hi, n, true).unwrap()
}

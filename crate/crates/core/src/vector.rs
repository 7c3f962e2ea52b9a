//! Laws of ID vectors with independent coordinates.
//!
//! Each coordinate is `X_k = γ_k + Σ jumps`, the jumps forming a Poisson
//! random measure with intensity ν̃_k. Every supported measure has
//! `∫_{|u|≤1}|u|ν̃(du) < ∞`, so no compensator is needed and `γ_k` is the
//! drift of the uncompensated representation: `E X_k = γ_k + ∫u ν̃_k(du)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::LevyMeasure1D;

/// One coordinate law: a Lévy measure and a drift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coordinate {
    pub measure: LevyMeasure1D,
    #[serde(default)]
    pub drift: f64,
}

impl Coordinate {
    pub fn new(measure: LevyMeasure1D) -> Self {
        Coordinate { measure, drift: 0.0 }
    }

    pub fn with_drift(measure: LevyMeasure1D, drift: f64) -> Self {
        Coordinate { measure, drift }
    }

    /// The coordinate minus its mean.
    pub fn centered(measure: LevyMeasure1D) -> Result<Self> {
        let drift = -measure.first_moment()?;
        Ok(Coordinate { measure, drift })
    }

    /// `E X` of the time-1 law.
    pub fn mean(&self) -> Result<f64> {
        Ok(self.drift + self.measure.first_moment()?)
    }

    /// The time-1 law is symmetric about 0 (drift included).
    pub fn is_symmetric(&self) -> bool {
        self.drift == 0.0 && self.measure.is_symmetric()
    }

    /// The time-1 law is carried by `[0, ∞)` (drift included).
    pub fn is_nonnegative(&self) -> bool {
        self.drift >= 0.0 && self.measure.is_nonnegative()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    Iid(Coordinate),
    Independent(Vec<Coordinate>),
}

/// Law of `X = (X_1, ..., X_d)` with independent coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdVectorSpec {
    d: usize,
    coordinates: Coordinates,
}

impl IdVectorSpec {
    pub fn iid(d: usize, coordinate: Coordinate) -> Result<Self> {
        let s = IdVectorSpec {
            d,
            coordinates: Coordinates::Iid(coordinate),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn independent(coordinates: Vec<Coordinate>) -> Result<Self> {
        let s = IdVectorSpec {
            d: coordinates.len(),
            coordinates: Coordinates::Independent(coordinates),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::config("dimension d must be at least 1"));
        }
        match &self.coordinates {
            Coordinates::Iid(c) => {
                c.measure.validate()?;
                if !c.drift.is_finite() {
                    return Err(Error::config("drift must be finite"));
                }
            }
            Coordinates::Independent(cs) => {
                if cs.len() != self.d {
                    return Err(Error::config(format!(
                        "{} coordinate laws given for dimension {}",
                        cs.len(),
                        self.d
                    )));
                }
                for c in cs {
                    c.measure.validate()?;
                    if !c.drift.is_finite() {
                        return Err(Error::config("drift must be finite"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn coordinates(&self) -> &Coordinates {
        &self.coordinates
    }

    pub fn coordinate(&self, k: usize) -> &Coordinate {
        match &self.coordinates {
            Coordinates::Iid(c) => c,
            Coordinates::Independent(cs) => &cs[k],
        }
    }

    /// The shared coordinate law, or a configuration error when the
    /// coordinates are not identically distributed.
    pub fn iid_coordinate(&self) -> Result<&Coordinate> {
        match &self.coordinates {
            Coordinates::Iid(c) => Ok(c),
            Coordinates::Independent(_) => Err(Error::config(
                "this bound needs i.i.d. coordinates; give one coordinate law",
            )),
        }
    }

    /// Distinct coordinate laws (one entry in the i.i.d. case).
    pub fn distinct(&self) -> Vec<&Coordinate> {
        match &self.coordinates {
            Coordinates::Iid(c) => vec![c],
            Coordinates::Independent(cs) => cs.iter().collect(),
        }
    }

    /// `min_k M_k`.
    pub fn exp_moment_abscissa(&self) -> f64 {
        self.distinct()
            .iter()
            .map(|c| c.measure.exp_moment_abscissa())
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_k R_k`.
    pub fn support_radius(&self) -> f64 {
        self.distinct()
            .iter()
            .map(|c| c.measure.support_radius())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_length_must_match() {
        let c = Coordinate::new(LevyMeasure1D::poisson_atom(1.0, 1.0).unwrap());
        let s = IdVectorSpec::independent(vec![c.clone(), c.clone()]).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.iid_coordinate().is_err());
        assert!(IdVectorSpec::iid(0, c).is_err());
    }

    #[test]
    fn centered_poisson_flags() {
        let m = LevyMeasure1D::poisson_atom(1.0, 1.0).unwrap();
        let c = Coordinate::centered(m.clone()).unwrap();
        assert_eq!(c.drift, -1.0);
        assert!(!c.is_nonnegative() && !c.is_symmetric());
        assert!(Coordinate::new(m).is_nonnegative());
        assert_eq!(c.mean().unwrap(), 0.0);
    }
}

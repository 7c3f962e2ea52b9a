//! Certified tail bounds evaluated on a deviation grid.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Provenance, RateInfo};

/// Which tail the bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `P(‖X‖ >= center + x)`
    Upper,
    /// `P(‖X‖ <= center - x)`
    Lower,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Upper => "upper",
            Direction::Lower => "lower",
        }
    }
}

/// Statistic of the norm the deviation is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterStat {
    /// `E‖X‖_p`
    Mean,
    /// `sqrt(E‖X‖_p²)`
    RootMeanSquare,
}

/// The center `factor·S + offset` of the deviation, where `S` is the
/// statistic `stat` of `‖X‖_p` (of `‖Π_S X‖_2` for projection bounds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub description: String,
    pub stat: CenterStat,
    pub factor: f64,
    pub offset: f64,
    /// Value of `S` used when the certificate was built, if any entered it.
    pub stat_value: Option<f64>,
    pub provenance: Option<Provenance>,
}

impl Centering {
    pub fn mean(p: f64) -> Self {
        Centering {
            description: format!("E‖X‖_{}", fmt_p(p)),
            stat: CenterStat::Mean,
            factor: 1.0,
            offset: 0.0,
            stat_value: None,
            provenance: None,
        }
    }

    pub fn scaled_mean(p: f64, factor: f64) -> Self {
        Centering {
            description: format!("{factor}·E‖X‖_{}", fmt_p(p)),
            factor,
            ..Centering::mean(p)
        }
    }

    pub fn with_value(mut self, value: f64, provenance: Provenance) -> Self {
        self.stat_value = Some(value);
        self.provenance = Some(provenance);
        self
    }

    /// `factor·S + offset`.
    pub fn center(&self, stat_value: f64) -> f64 {
        self.factor * stat_value + self.offset
    }
}

fn fmt_p(p: f64) -> String {
    if p.fract() == 0.0 {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

/// A tail bound `bound[i]` for every deviation `x_grid[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    /// Short name of the bound: `thm1`, `thm2`, `cor2`, ...
    pub family: String,
    /// Lévy family of the coordinates.
    pub measure_family: String,
    pub rate: RateInfo,
    pub norm_p: f64,
    pub direction: Direction,
    pub centering: Centering,
    pub x_grid: Vec<f64>,
    /// `-log` of each bound value; exact even where `bound` underflows.
    pub neg_log_bound: Vec<f64>,
    pub bound: Vec<f64>,
    /// Largest admissible deviation; `None` means unbounded.
    pub validity_sup: Option<f64>,
    pub dimension_dependent: bool,
    pub notes: Vec<String>,
}

impl BoundCertificate {
    pub fn validity_sup_value(&self) -> f64 {
        self.validity_sup.unwrap_or(f64::INFINITY)
    }

    /// Check the invariants: bound in `(0, 1]`, nonincreasing in `x`, every
    /// `x` below the validity supremum.
    pub fn check(&self) -> Result<()> {
        if self.x_grid.len() != self.bound.len() || self.bound.len() != self.neg_log_bound.len() {
            return Err(Error::config("certificate grid and bound lengths differ"));
        }
        let sup = self.validity_sup_value();
        for (i, (&x, &b)) in self.x_grid.iter().zip(&self.bound).enumerate() {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::numeric(format!("bound at x = {x} is {b}, not in (0, 1]"), b));
            }
            if x >= sup {
                return Err(Error::range(format!("x = {x} is not below the validity supremum"), sup));
            }
            if i > 0 && self.x_grid[i - 1] <= x && self.bound[i - 1] < b {
                return Err(Error::numeric(
                    format!("bound increases between x = {} and x = {x}", self.x_grid[i - 1]),
                    b - self.bound[i - 1],
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    /// CSV rows `x, bound, family, direction, validity_sup, centering_value`
    /// with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,bound,family,direction,validity_sup,centering_value\n");
        let sup = fmt_float(self.validity_sup_value());
        let center = self
            .centering
            .stat_value
            .map(|v| fmt_float(self.centering.center(v)))
            .unwrap_or_default();
        for (x, b) in self.x_grid.iter().zip(&self.bound) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_float(*x),
                fmt_float(*b),
                self.family,
                self.direction.as_str(),
                sup,
                center
            );
        }
        out
    }
}

/// Fixed 17-significant-digit rendering used by every CSV writer.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

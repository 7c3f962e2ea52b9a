//! Adaptive Gauss–Kronrod quadrature on finite intervals.
//!
//! The 15-point Kronrod rule never evaluates the interval endpoints, so
//! integrands that are bounded but undefined at an endpoint (`0 * inf` at
//! `u = 0` for the `1/|u|` Lévy densities) are handled without special
//! casing.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Absolute and relative error targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-9,
            rel: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Result of a quadrature: the estimate and its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            abs_err: self.abs_err + rhs.abs_err,
        }
    }
}

impl Estimate {
    pub const ZERO: Estimate = Estimate {
        value: 0.0,
        abs_err: 0.0,
    };
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Estimate {
        value: kronrod * half,
        abs_err: ((kronrod - gauss) * half).abs(),
    }
}

const MAX_INTERVALS: usize = 2000;

/// Integrate `f` over the finite interval `[a, b]` by global adaptive
/// bisection of the interval with the largest error estimate.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("quadrature interval [{a}, {b}] is not finite")));
    }
    if a == b {
        return Ok(Estimate::ZERO);
    }
    if b < a {
        let e = integrate(f, b, a, tol)?;
        return Ok(Estimate {
            value: -e.value,
            abs_err: e.abs_err,
        });
    }
    let first = gk15(&mut f, a, b);
    let mut pieces: Vec<(f64, f64, Estimate)> = vec![(a, b, first)];
    let mut total = first;
    loop {
        if !total.value.is_finite() {
            return Err(Error::numeric("non-finite integrand value", f64::NAN));
        }
        if total.abs_err <= tol.target(total.value) {
            return Ok(total);
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::numeric(
                format!("adaptive quadrature on [{a}, {b}] hit the subdivision limit"),
                total.abs_err,
            ));
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.abs_err.total_cmp(&y.1 .2.abs_err))
            .expect("non-empty");
        let (lo, hi, old) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval cannot be split further in floating point
            return Err(Error::numeric(
                format!("quadrature on [{a}, {b}] stalled near {mid}"),
                total.abs_err,
            ));
        }
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        total.value += left.value + right.value - old.value;
        total.abs_err += left.abs_err + right.abs_err - old.abs_err;
        pieces.push((lo, mid, left));
        pieces.push((mid, hi, right));
        // re-sum occasionally to avoid drift from incremental updates
        if pieces.len().is_multiple_of(64) {
            total = pieces.iter().fold(Estimate::ZERO, |acc, p| acc + p.2);
        }
    }
}

/// Integrate over `[a, b]` split at the given interior break points.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    let mut total = Estimate::ZERO;
    for w in breaks.windows(2) {
        total = total + integrate(&mut f, w[0], w[1], tol)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let e = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, Tolerance::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert_relative_eq!(e.value, exact, max_relative = 1e-14);
    }

    #[test]
    fn log_singularity_at_endpoint() {
        // ∫_0^1 log(x) dx = -1, integrand undefined at 0
        let e = integrate(f64::ln, 0.0, 1.0, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert_relative_eq!(e.value, -1.0, max_relative = 1e-10);
    }

    #[test]
    fn reversed_interval_changes_sign() {
        let e = integrate(f64::exp, 1.0, 0.0, Tolerance::default()).unwrap();
        assert_relative_eq!(e.value, -(1f64.exp() - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn nan_integrand_is_an_error() {
        let r = integrate(|_| f64::NAN, 0.0, 1.0, Tolerance::default());
        assert!(matches!(r, Err(Error::Numeric { .. })));
    }
}

//! Exact quantities of one-dimensional marginal laws, where a closed form
//! or a convergent series exists. These feed the rate functions as
//! analytic inputs and serve as oracles in tests.

use statrs::function::gamma::{gamma, ln_gamma};

use crate::levy::LevyMeasure1D;
use crate::quadrature::{self, Tolerance};
use crate::vector::Coordinate;

/// Poisson(μ) probabilities `P(N = k)` for `k = 0..K`, with `K` large enough
/// that the omitted mass is below `1e-17`.
pub fn poisson_pmf(mu: f64) -> Vec<f64> {
    let kmax = (mu + 40.0 * mu.sqrt() + 60.0).ceil() as usize;
    (0..=kmax)
        .map(|k| (-mu + k as f64 * mu.ln() - ln_gamma(k as f64 + 1.0)).exp())
        .collect()
}

/// `E f(X)` for the time-`z` law of a Poisson-atom coordinate,
/// `X = z·drift + a·N`, `N ~ Poisson(z·λ)`.
fn poisson_expectation<F: Fn(f64) -> f64>(c: &Coordinate, z: f64, f: F) -> Option<f64> {
    match c.measure {
        LevyMeasure1D::PoissonAtom { intensity, jump } => {
            let pmf = poisson_pmf(z * intensity);
            Some(
                pmf.iter()
                    .enumerate()
                    .map(|(k, p)| p * f(z * c.drift + jump * k as f64))
                    .sum(),
            )
        }
        _ => None,
    }
}

/// A density with its support interval.
type Density = (Box<dyn Fn(f64) -> f64>, f64, f64);

/// Density of the time-1 law when it has a simple closed form.
fn density(c: &Coordinate) -> Option<Density> {
    match c.measure {
        LevyMeasure1D::SymmetricExponential { scale } => Some((
            Box::new(move |x: f64| (-x.abs() / scale).exp() / (2.0 * scale)),
            scale,
            f64::NEG_INFINITY,
        )),
        LevyMeasure1D::GammaLevy { rate, shape } => {
            let norm = rate.powf(shape) / gamma(shape);
            Some((
                Box::new(move |x: f64| {
                    if x <= 0.0 {
                        0.0
                    } else {
                        norm * x.powf(shape - 1.0) * (-rate * x).exp()
                    }
                }),
                1.0 / rate,
                0.0,
            ))
        }
        _ => None,
    }
}

/// `∫ f(x) p(x) dx` over the time-1 density with zero drift, integrating
/// out to 80 scale lengths.
fn density_expectation<F: Fn(f64) -> f64>(c: &Coordinate, f: F) -> Option<f64> {
    if c.drift != 0.0 {
        return None;
    }
    let (p, scale, lower) = density(c)?;
    let tol = Tolerance::new(1e-15, 1e-12);
    let hi = 80.0 * scale;
    let pos = quadrature::integrate_pieces(
        |x| f(x) * p(x),
        &[0.0, scale, 4.0 * scale, 16.0 * scale, hi],
        tol,
    )
    .ok()?
    .value;
    let neg = if lower == 0.0 {
        0.0
    } else {
        quadrature::integrate_pieces(
            |x| f(-x) * p(-x),
            &[0.0, scale, 4.0 * scale, 16.0 * scale, hi],
            tol,
        )
        .ok()?
        .value
    };
    Some(pos + neg)
}

/// `E|X|^q` of the time-1 law.
pub fn abs_moment(c: &Coordinate, q: f64) -> Option<f64> {
    match c.measure {
        LevyMeasure1D::SymmetricExponential { scale } if c.drift == 0.0 => {
            Some(scale.powf(q) * gamma(q + 1.0))
        }
        LevyMeasure1D::GammaLevy { rate, shape } if c.drift == 0.0 => {
            Some((ln_gamma(shape + q) - ln_gamma(shape)).exp() / rate.powf(q))
        }
        LevyMeasure1D::PoissonAtom { .. } => poisson_expectation(c, 1.0, |x| x.abs().powf(q)),
        _ => None,
    }
}

/// `E e^{-X²}` of the time-1 law.
pub fn exp_neg_square(c: &Coordinate) -> Option<f64> {
    match c.measure {
        LevyMeasure1D::PoissonAtom { .. } => poisson_expectation(c, 1.0, |x| (-x * x).exp()),
        _ => density_expectation(c, |x| (-x * x).exp()),
    }
}

/// `E X²` of the time-1 law: `∫u²ν̃ + (E X)²`.
pub fn second_moment(c: &Coordinate) -> Option<f64> {
    let var = c.measure.poly_moment(2.0).ok()?;
    let mean = c.mean().ok()?;
    Some(var + mean * mean)
}

/// `P(|X| >= level)` of the time-1 law.
pub fn abs_survival(c: &Coordinate, level: f64) -> Option<f64> {
    if level <= 0.0 {
        return Some(1.0);
    }
    match c.measure {
        LevyMeasure1D::SymmetricExponential { scale } if c.drift == 0.0 => Some((-level / scale).exp()),
        LevyMeasure1D::PoissonAtom { .. } => {
            // tolerance on the comparison guards against x landing on an atom
            // after floating-point rounding
            poisson_expectation(c, 1.0, |x| if x.abs() >= level * (1.0 - 1e-12) { 1.0 } else { 0.0 })
        }
        _ => None,
    }
}

/// `P(|X| <= level)` of the time-1 law.
pub fn abs_cdf(c: &Coordinate, level: f64) -> Option<f64> {
    if level < 0.0 {
        return Some(0.0);
    }
    match c.measure {
        LevyMeasure1D::SymmetricExponential { scale } if c.drift == 0.0 => Some(1.0 - (-level / scale).exp()),
        LevyMeasure1D::PoissonAtom { .. } => {
            poisson_expectation(c, 1.0, |x| if x.abs() <= level * (1.0 + 1e-12) { 1.0 } else { 0.0 })
        }
        _ => None,
    }
}

/// `E[(X^±)^q]` at time 1, i.e. the `z ∈ {0, 1}` endpoints of the modified
/// moments, where `X⁺ = X·1{X ≥ 0}` and `X⁻ = X·1{X < 0}`.
pub fn signed_part_moment(c: &Coordinate, q: f64, positive: bool) -> Option<f64> {
    let part = move |x: f64| {
        if (x >= 0.0) == positive {
            x.abs().powf(q)
        } else {
            0.0
        }
    };
    match c.measure {
        LevyMeasure1D::PoissonAtom { .. } => poisson_expectation(c, 1.0, part),
        _ => density_expectation(c, part),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplace() -> Coordinate {
        Coordinate::new(LevyMeasure1D::symmetric_exponential(1.0).unwrap())
    }

    fn poisson() -> Coordinate {
        Coordinate::new(LevyMeasure1D::poisson_atom(1.0, 1.0).unwrap())
    }

    #[test]
    fn laplace_moments() {
        assert_relative_eq!(abs_moment(&laplace(), 1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(abs_moment(&laplace(), 2.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(abs_moment(&laplace(), 4.0).unwrap(), 24.0, max_relative = 1e-13);
        assert_relative_eq!(signed_part_moment(&laplace(), 2.0, true).unwrap(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn poisson_raw_moments() {
        assert_relative_eq!(abs_moment(&poisson(), 2.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(abs_moment(&poisson(), 4.0).unwrap(), 15.0, max_relative = 1e-14);
        let centered = Coordinate::centered(LevyMeasure1D::poisson_atom(1.0, 1.0).unwrap()).unwrap();
        // E|N - 1| = 2/e
        assert_relative_eq!(abs_moment(&centered, 1.0).unwrap(), 2.0 / std::f64::consts::E, max_relative = 1e-14);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn exp_neg_square_values() {
        // E e^{-X²} for Laplace(1) = e^{1/4}·√π·erfc(1/2)/2, evaluated at 30 digits
        let expected = 0.545_641_360_765_047_042;
        assert_relative_eq!(exp_neg_square(&laplace()).unwrap(), expected, max_relative = 1e-12);
        let via_statrs = 0.25f64.exp() * std::f64::consts::PI.sqrt() * statrs::function::erf::erfc(0.5) / 2.0;
        assert_relative_eq!(via_statrs, expected, max_relative = 1e-9);
        let series: f64 = (0..30)
            .map(|k| (-(k as f64).powi(2)).exp() * (-1.0f64).exp() / gamma(k as f64 + 1.0))
            .sum();
        assert_relative_eq!(exp_neg_square(&poisson()).unwrap(), series, max_relative = 1e-14);
    }

    #[test]
    fn gamma_moments_match_density() {
        let c = Coordinate::new(LevyMeasure1D::gamma_levy(2.0, 1.5).unwrap());
        let via_density = density_expectation(&c, |x| x.abs().powf(3.0)).unwrap();
        assert_relative_eq!(abs_moment(&c, 3.0).unwrap(), via_density, max_relative = 1e-10);
    }
}

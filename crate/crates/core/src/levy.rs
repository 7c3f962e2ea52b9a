//! One-dimensional Lévy measures and the integral functionals every rate
//! function is built from.
//!
//! All families sit behind a single [`LevyMeasure1D::integrate`] entry point:
//! atoms are summed, densities are integrated by adaptive quadrature split at
//! `0` and at `|u| = 1` (in units of the family's scale), with a certified
//! truncation of unbounded supports.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{self, Estimate, Tolerance};

/// Relative size of the discarded tail beyond the truncation point.
const TAIL_REL: f64 = 1e-12;

/// Law of a single jump of a compound Poisson measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    Uniform { lo: f64, hi: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl JumpLaw {
    fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::config(format!("uniform jump law needs lo < hi, got [{lo}, {hi}]")));
                }
            }
            JumpLaw::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::config("discrete jump law needs equal-length, non-empty values and probs"));
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::config("discrete jump probabilities must be nonnegative"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::config(format!("discrete jump probabilities sum to {total}, not 1")));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("discrete jump values must be finite"));
                }
            }
        }
        Ok(())
    }
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Where a custom Lévy density comes from.
#[derive(Clone)]
pub enum DensitySource {
    /// Piecewise-linear density through sorted `(u, k(u))` nodes, zero
    /// outside the first and last node.
    Table(Vec<(f64, f64)>),
    /// Arbitrary density on a finite support interval. Not serializable.
    Function { density: DensityFn, lo: f64, hi: f64 },
}

impl fmt::Debug for DensitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySource::Table(t) => f.debug_tuple("Table").field(&t.len()).finish(),
            DensitySource::Function { lo, hi, .. } => f
                .debug_struct("Function")
                .field("lo", lo)
                .field("hi", hi)
                .finish_non_exhaustive(),
        }
    }
}

/// A caller-supplied density with declared abscissa `M` and support
/// radius `R`. The library never infers either from the density.
#[derive(Debug, Clone)]
pub struct CustomDensity {
    source: DensitySource,
    m: f64,
    r: f64,
}

impl CustomDensity {
    /// `m` and `r` may be `f64::INFINITY`.
    pub fn from_table(mut nodes: Vec<(f64, f64)>, m: f64, r: f64) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::config("density_table needs at least two nodes"));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        if nodes.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::config("density_table has duplicate abscissae"));
        }
        if nodes.iter().any(|(u, k)| !u.is_finite() || !k.is_finite() || *k < 0.0) {
            return Err(Error::config("density_table entries must be finite with k(u) >= 0"));
        }
        let c = CustomDensity {
            source: DensitySource::Table(nodes),
            m,
            r,
        };
        c.validate_declared()?;
        Ok(c)
    }

    /// Density given as a function on `[lo, hi]`. Rejected when the small
    /// jumps have infinite variation, i.e. `∫_{|u|≤1} |u| k(u) du = ∞`.
    pub fn from_fn(density: DensityFn, lo: f64, hi: f64, m: f64, r: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config(format!("custom density support [{lo}, {hi}] must be finite and non-empty")));
        }
        let c = CustomDensity {
            source: DensitySource::Function { density, lo, hi },
            m,
            r,
        };
        c.validate_declared()?;
        c.check_finite_variation()?;
        Ok(c)
    }

    fn validate_declared(&self) -> Result<()> {
        if self.m.is_nan() || self.m <= 0.0 {
            return Err(Error::config(format!("custom density declares M = {}, need M > 0", self.m)));
        }
        if self.r.is_nan() || self.r <= 0.0 {
            return Err(Error::config(format!("custom density declares R = {}, need R > 0", self.r)));
        }
        let (lo, hi) = self.support();
        let natural = lo.abs().max(hi.abs());
        if self.r < natural && self.mass_beyond(self.r) > 0.0 {
            return Err(Error::config(format!(
                "custom density declares R = {} but has mass beyond it (support reaches {natural})",
                self.r
            )));
        }
        Ok(())
    }

    fn mass_beyond(&self, rho: f64) -> f64 {
        let (lo, hi) = self.support();
        let tol = Tolerance::default();
        let mut total = 0.0;
        if hi > rho {
            total += quadrature::integrate(|u| self.density(u), rho.max(lo), hi, tol)
                .map(|e| e.value)
                .unwrap_or(f64::INFINITY);
        }
        if lo < -rho {
            total += quadrature::integrate(|u| self.density(u), lo, (-rho).min(hi), tol)
                .map(|e| e.value)
                .unwrap_or(f64::INFINITY);
        }
        total
    }

    /// Heuristic: the increments of `∫_{δ≤|u|≤1}|u|k` over δ = 2^-10, 2^-20,
    /// 2^-30 must shrink.
    fn check_finite_variation(&self) -> Result<()> {
        let tol = Tolerance::new(1e-12, 1e-10);
        let side = |a: f64, b: f64| -> f64 {
            quadrature::integrate(|u| u.abs() * self.density(u), a, b, tol)
                .map(|e| e.value.abs())
                .unwrap_or(f64::INFINITY)
        };
        let (lo, hi) = self.support();
        let piece = |from: f64, to: f64| -> f64 {
            let mut s = 0.0;
            if hi > from {
                s += side(from, to.min(hi));
            }
            if lo < -from {
                s += side((-to).max(lo), -from);
            }
            s
        };
        let inc1 = piece(2f64.powi(-20), 2f64.powi(-10));
        let inc2 = piece(2f64.powi(-30), 2f64.powi(-20));
        if !inc2.is_finite() || (inc1 > 0.0 && inc2 > 0.5 * inc1) || (inc1 == 0.0 && inc2 > 0.0) {
            return Err(Error::Unsupported(
                "custom density has infinite variation near 0 (∫_{|u|≤1}|u|k(u)du diverges)".into(),
            ));
        }
        Ok(())
    }

    pub fn source(&self) -> &DensitySource {
        &self.source
    }

    pub fn support(&self) -> (f64, f64) {
        match &self.source {
            DensitySource::Table(t) => (t[0].0, t[t.len() - 1].0),
            DensitySource::Function { lo, hi, .. } => (*lo, *hi),
        }
    }

    pub fn density(&self, u: f64) -> f64 {
        match &self.source {
            DensitySource::Table(t) => {
                if u < t[0].0 || u > t[t.len() - 1].0 {
                    return 0.0;
                }
                let i = t.partition_point(|n| n.0 <= u);
                if i == 0 {
                    return t[0].1;
                }
                if i >= t.len() {
                    return t[t.len() - 1].1;
                }
                let (u0, k0) = t[i - 1];
                let (u1, k1) = t[i];
                k0 + (k1 - k0) * (u - u0) / (u1 - u0)
            }
            DensitySource::Function { density, lo, hi } => {
                if u < *lo || u > *hi {
                    0.0
                } else {
                    density(u)
                }
            }
        }
    }

    /// Break points for quadrature: table nodes (or support ends), plus 0 and ±1.
    pub(crate) fn breaks(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        let mut b: Vec<f64> = match &self.source {
            DensitySource::Table(t) => t.iter().map(|n| n.0).collect(),
            DensitySource::Function { .. } => vec![lo, hi],
        };
        for extra in [-1.0, 0.0, 1.0] {
            if extra > lo && extra < hi {
                b.push(extra);
            }
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// Family and parameters of a one-dimensional Lévy measure ν̃.
#[derive(Debug, Clone)]
pub enum LevyMeasure1D {
    /// Density `e^{-|u|/σ}/|u|` on `u ≠ 0`; the time-1 law is Laplace(σ).
    SymmetricExponential { scale: f64 },
    /// Density `shape·e^{-rate·u}/u` on `u > 0`; the time-1 law is Gamma(shape, rate).
    GammaLevy { rate: f64, shape: f64 },
    /// Mass `intensity` at the single point `jump`.
    PoissonAtom { intensity: f64, jump: f64 },
    /// `rate` times the law of one jump.
    CompoundPoisson { rate: f64, jumps: JumpLaw },
    CustomDensity(CustomDensity),
}

/// Growth of an integrand for large `|u|`: `|f(u)| ≲ |u|^degree · e^{exp_rate·|u|}`,
/// with `f(u)·|u|^{-degree}·e^{-exp_rate·|u|}` eventually nonincreasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub degree: f64,
    pub exp_rate: f64,
}

impl Growth {
    pub fn poly(degree: f64) -> Self {
        Growth { degree, exp_rate: 0.0 }
    }

    pub fn exp(degree: f64, exp_rate: f64) -> Self {
        Growth { degree, exp_rate }
    }
}

/// Value of `∫ f dν̃` with its error estimate and, for unbounded supports,
/// the truncation point actually used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
    pub cutoff: Option<f64>,
}

impl LevyMeasure1D {
    pub fn symmetric_exponential(scale: f64) -> Result<Self> {
        let m = LevyMeasure1D::SymmetricExponential { scale };
        m.validate()?;
        Ok(m)
    }

    pub fn gamma_levy(rate: f64, shape: f64) -> Result<Self> {
        let m = LevyMeasure1D::GammaLevy { rate, shape };
        m.validate()?;
        Ok(m)
    }

    pub fn poisson_atom(intensity: f64, jump: f64) -> Result<Self> {
        let m = LevyMeasure1D::PoissonAtom { intensity, jump };
        m.validate()?;
        Ok(m)
    }

    pub fn compound_poisson(rate: f64, jumps: JumpLaw) -> Result<Self> {
        let m = LevyMeasure1D::CompoundPoisson { rate, jumps };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            LevyMeasure1D::SymmetricExponential { scale } => positive("scale", *scale),
            LevyMeasure1D::GammaLevy { rate, shape } => {
                positive("rate", *rate)?;
                positive("shape", *shape)
            }
            LevyMeasure1D::PoissonAtom { intensity, jump } => {
                positive("intensity", *intensity)?;
                if !jump.is_finite() || *jump == 0.0 {
                    return Err(Error::config(format!("jump must be finite and nonzero, got {jump}")));
                }
                Ok(())
            }
            LevyMeasure1D::CompoundPoisson { rate, jumps } => {
                positive("rate", *rate)?;
                jumps.validate()
            }
            LevyMeasure1D::CustomDensity(c) => c.validate_declared(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            LevyMeasure1D::SymmetricExponential { .. } => "symmetric_exponential",
            LevyMeasure1D::GammaLevy { .. } => "gamma_levy",
            LevyMeasure1D::PoissonAtom { .. } => "poisson_atom",
            LevyMeasure1D::CompoundPoisson { .. } => "compound_poisson",
            LevyMeasure1D::CustomDensity(_) => "custom_density",
        }
    }

    /// `M = sup{t : ∫_{|u|>1} e^{t|u|} ν̃(du) < ∞}`.
    pub fn exp_moment_abscissa(&self) -> f64 {
        match self {
            LevyMeasure1D::SymmetricExponential { scale } => 1.0 / scale,
            LevyMeasure1D::GammaLevy { rate, .. } => *rate,
            LevyMeasure1D::PoissonAtom { .. } | LevyMeasure1D::CompoundPoisson { .. } => f64::INFINITY,
            LevyMeasure1D::CustomDensity(c) => c.m,
        }
    }

    /// `R = inf{ρ : ν̃(|u| > ρ) = 0}`.
    pub fn support_radius(&self) -> f64 {
        match self {
            LevyMeasure1D::SymmetricExponential { .. } | LevyMeasure1D::GammaLevy { .. } => f64::INFINITY,
            LevyMeasure1D::PoissonAtom { jump, .. } => jump.abs(),
            LevyMeasure1D::CompoundPoisson { jumps, .. } => match jumps {
                JumpLaw::Uniform { lo, hi } => lo.abs().max(hi.abs()),
                JumpLaw::Discrete { values, probs } => values
                    .iter()
                    .zip(probs)
                    .filter(|(_, p)| **p > 0.0)
                    .fold(0.0, |acc, (v, _)| acc.max(v.abs())),
            },
            LevyMeasure1D::CustomDensity(c) => c.r,
        }
    }

    /// True when ν̃ is invariant under `u ↦ -u`.
    pub fn is_symmetric(&self) -> bool {
        match self {
            LevyMeasure1D::SymmetricExponential { .. } => true,
            LevyMeasure1D::GammaLevy { .. } | LevyMeasure1D::PoissonAtom { .. } => false,
            LevyMeasure1D::CompoundPoisson { jumps, .. } => match jumps {
                JumpLaw::Uniform { lo, hi } => *lo == -*hi,
                JumpLaw::Discrete { values, probs } => {
                    let mut pos: Vec<(f64, f64)> = Vec::new();
                    let mut neg: Vec<(f64, f64)> = Vec::new();
                    for (v, p) in values.iter().zip(probs) {
                        if *p == 0.0 || *v == 0.0 {
                            continue;
                        }
                        if *v > 0.0 {
                            pos.push((*v, *p));
                        } else {
                            neg.push((-*v, *p));
                        }
                    }
                    pos.sort_by(|a, b| a.0.total_cmp(&b.0));
                    neg.sort_by(|a, b| a.0.total_cmp(&b.0));
                    pos == neg
                }
            },
            LevyMeasure1D::CustomDensity(c) => match &c.source {
                DensitySource::Table(t) => {
                    let n = t.len();
                    (0..n).all(|i| t[i].0 == -t[n - 1 - i].0 && t[i].1 == t[n - 1 - i].1)
                }
                DensitySource::Function { .. } => false,
            },
        }
    }

    /// True when ν̃ is carried by `(0, ∞)`.
    pub fn is_nonnegative(&self) -> bool {
        match self {
            LevyMeasure1D::SymmetricExponential { .. } => false,
            LevyMeasure1D::GammaLevy { .. } => true,
            LevyMeasure1D::PoissonAtom { jump, .. } => *jump > 0.0,
            LevyMeasure1D::CompoundPoisson { jumps, .. } => match jumps {
                JumpLaw::Uniform { lo, .. } => *lo >= 0.0,
                JumpLaw::Discrete { values, probs } => {
                    values.iter().zip(probs).all(|(v, p)| *p == 0.0 || *v >= 0.0)
                }
            },
            LevyMeasure1D::CustomDensity(c) => c.support().0 >= 0.0,
        }
    }

    /// `∫ f(u) ν̃(du)`.
    ///
    /// `f` must be finite on the support minus the origin; `f(u)·k(u)` must be
    /// integrable at 0. `growth` describes `f` for large `|u|` and drives the
    /// truncation of unbounded supports.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, growth: Growth, tol: Tolerance) -> Result<Integral> {
        match self {
            LevyMeasure1D::PoissonAtom { intensity, jump } => Ok(exact(intensity * f(*jump))),
            LevyMeasure1D::CompoundPoisson { rate, jumps } => match jumps {
                JumpLaw::Discrete { values, probs } => Ok(exact(
                    rate * values.iter().zip(probs).map(|(v, p)| if *p > 0.0 { p * f(*v) } else { 0.0 }).sum::<f64>(),
                )),
                JumpLaw::Uniform { lo, hi } => {
                    let k = rate / (hi - lo);
                    let mut breaks = vec![*lo, *hi];
                    if 0.0 > *lo && 0.0 < *hi {
                        breaks.insert(1, 0.0);
                    }
                    let e = quadrature::integrate_pieces(|u| k * f(u), &breaks, tol)?;
                    Ok(from_estimate(e, None))
                }
            },
            LevyMeasure1D::CustomDensity(c) => {
                let e = quadrature::integrate_pieces(|u| f(u) * c.density(u), &c.breaks(), tol)?;
                Ok(from_estimate(e, None))
            }
            LevyMeasure1D::SymmetricExponential { scale } => {
                let decay = 1.0 / scale;
                let k = |u: f64| (-u.abs() / scale).exp() / u.abs();
                let pos = half_line(|u| f(u) * k(u), *scale, decay, growth, tol)?;
                let neg = half_line(|u| f(-u) * k(u), *scale, decay, growth, tol)?;
                Ok(Integral {
                    value: pos.value + neg.value,
                    abs_err: pos.abs_err + neg.abs_err,
                    cutoff: max_cutoff(pos.cutoff, neg.cutoff),
                })
            }
            LevyMeasure1D::GammaLevy { rate, shape } => {
                half_line(|u| f(u) * shape * (-rate * u).exp() / u, 1.0 / rate, *rate, growth, tol)
            }
        }
    }

    fn check_t(&self, t: f64) -> Result<()> {
        let m = self.exp_moment_abscissa();
        if !(t >= 0.0) {
            return Err(Error::domain(format!("t = {t} must be nonnegative")));
        }
        if t >= m {
            return Err(Error::domain(format!(
                "t = {t} is beyond exponential-moment abscissa M = {m}"
            )));
        }
        Ok(())
    }

    /// `∫ |u|^r (e^{t|u|} - 1) ν̃(du)` for `0 <= t < M`, `r >= 1`.
    ///
    /// Closed form where the family has one, quadrature otherwise.
    pub fn exp_moment_integral(&self, t: f64, r: f64) -> Result<f64> {
        self.check_t(t)?;
        if !(r >= 1.0) {
            return Err(Error::domain(format!("power r = {r} must be >= 1")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        match self {
            LevyMeasure1D::SymmetricExponential { scale } => {
                Ok(2.0 * gamma(r) * scale.powf(r) * ((1.0 - scale * t).powf(-r) - 1.0))
            }
            LevyMeasure1D::GammaLevy { rate, shape } => {
                Ok(shape * gamma(r) * ((rate - t).powf(-r) - rate.powf(-r)))
            }
            _ => self.exp_moment_integral_quadrature(t, r, Tolerance::default()),
        }
    }

    /// Quadrature route for `exp_moment_integral`, independent of the closed forms.
    pub fn exp_moment_integral_quadrature(&self, t: f64, r: f64, tol: Tolerance) -> Result<f64> {
        self.weighted_exp_moment(t, r, |_| 1.0, 0.0, tol)
    }

    /// `∫ w(|u|) |u|^r (e^{t|u|} - 1) ν̃(du)` where `w` grows at most like
    /// `|u|^weight_degree`.
    pub fn weighted_exp_moment<W: Fn(f64) -> f64>(
        &self,
        t: f64,
        r: f64,
        weight: W,
        weight_degree: f64,
        tol: Tolerance,
    ) -> Result<f64> {
        self.check_t(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let growth = Growth::exp(r + weight_degree.max(0.0), t);
        // e^{t a} and the density's e^{-a/σ} are combined before
        // multiplying so the integrand cannot overflow near t = M
        let combined = |a: f64, decay: f64| weight(a) * a.powf(r - 1.0) * ((t - decay) * a).exp() * (-t * a).exp_m1().abs();
        match self {
            LevyMeasure1D::SymmetricExponential { scale } => {
                let decay = 1.0 / scale;
                let i = half_line(|a| combined(a, decay), *scale, decay, growth, tol)?;
                Ok(2.0 * i.value)
            }
            LevyMeasure1D::GammaLevy { rate, shape } => {
                let i = half_line(|a| shape * combined(a, *rate), 1.0 / rate, *rate, growth, tol)?;
                Ok(i.value)
            }
            _ => {
                let overflow = std::sync::atomic::AtomicBool::new(false);
                let f = |u: f64| {
                    let a = u.abs();
                    if a == 0.0 {
                        return 0.0;
                    }
                    let v = weight(a) * a.powf(r) * (t * a).exp_m1();
                    if v == f64::INFINITY {
                        overflow.store(true, std::sync::atomic::Ordering::Relaxed);
                    }
                    v
                };
                match self.integrate(f, growth, tol) {
                    Ok(i) if i.value.is_finite() => Ok(i.value),
                    _ if overflow.load(std::sync::atomic::Ordering::Relaxed) => Ok(f64::INFINITY),
                    r => Ok(r?.value),
                }
            }
        }
    }

    /// `∫ |u|^q ν̃(du)` for `q > 0`.
    pub fn poly_moment(&self, q: f64) -> Result<f64> {
        if !(q > 0.0) {
            return Err(Error::domain(format!("∫|u|^q ν̃(du) diverges at 0 for q = {q}")));
        }
        match self {
            LevyMeasure1D::SymmetricExponential { scale } => Ok(2.0 * gamma(q) * scale.powf(q)),
            LevyMeasure1D::GammaLevy { rate, shape } => Ok(shape * gamma(q) * rate.powf(-q)),
            LevyMeasure1D::PoissonAtom { intensity, jump } => Ok(intensity * jump.abs().powf(q)),
            LevyMeasure1D::CompoundPoisson { rate, jumps: JumpLaw::Uniform { lo, hi } } => {
                // ∫|u|^q du over [lo, hi]
                let prim = |x: f64| x.signum() * x.abs().powf(q + 1.0) / (q + 1.0);
                Ok(rate * (prim(*hi) - prim(*lo)) / (hi - lo))
            }
            _ => self.poly_moment_quadrature(q, Tolerance::default()),
        }
    }

    pub fn poly_moment_quadrature(&self, q: f64, tol: Tolerance) -> Result<f64> {
        if !(q > 0.0) {
            return Err(Error::domain(format!("∫|u|^q ν̃(du) diverges at 0 for q = {q}")));
        }
        Ok(self.integrate(|u| u.abs().powf(q), Growth::poly(q), tol)?.value)
    }

    /// `∫ u ν̃(du)`, finite for every supported family.
    pub fn first_moment(&self) -> Result<f64> {
        match self {
            LevyMeasure1D::SymmetricExponential { .. } => Ok(0.0),
            LevyMeasure1D::GammaLevy { rate, shape } => Ok(shape / rate),
            LevyMeasure1D::PoissonAtom { intensity, jump } => Ok(intensity * jump),
            _ => Ok(self.integrate(|u| u, Growth::poly(1.0), Tolerance::default())?.value),
        }
    }

    /// `∫ (1 ∧ u²) ν̃(du)`: finite for every Lévy measure.
    pub fn levy_condition_integral(&self) -> Result<f64> {
        Ok(self
            .integrate(|u| (u * u).min(1.0), Growth::poly(0.0), Tolerance::default())?
            .value)
    }
}

fn exact(value: f64) -> Integral {
    Integral {
        value,
        abs_err: 0.0,
        cutoff: None,
    }
}

fn from_estimate(e: Estimate, cutoff: Option<f64>) -> Integral {
    Integral {
        value: e.value,
        abs_err: e.abs_err,
        cutoff,
    }
}

fn max_cutoff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// `∫_0^∞ g(u) du` for `g = f·k` with `k(u) ~ e^{-decay·u}/u`.
///
/// Integrates `[0, s]` and then dyadic pieces `[s·2^j, s·2^{j+1}]` until the
/// envelope bound `g(U)/(κ - D/U)` on the remainder, with `κ = decay - exp_rate`
/// and `D = degree - 1`, falls below `1e-12` of the running total.
fn half_line<G: Fn(f64) -> f64>(
    g: G,
    scale: f64,
    decay: f64,
    growth: Growth,
    tol: Tolerance,
) -> Result<Integral> {
    let kappa = decay - growth.exp_rate;
    if !(kappa > 0.0) {
        return Err(Error::domain(format!(
            "integrand grows like e^{{{}|u|}}, not integrable against a density decaying like e^{{-{decay}|u|}}",
            growth.exp_rate
        )));
    }
    let degree = growth.degree - 1.0;
    let mut total = quadrature::integrate(&g, 0.0, scale, tol)?;
    let mut lo = scale;
    for _ in 0..2000 {
        let hi = 2.0 * lo;
        total = total + quadrature::integrate(&g, lo, hi, tol)?;
        if kappa * hi >= 2.0 * degree.max(0.0) {
            let rate = if degree > 0.0 { kappa - degree / hi } else { kappa };
            let remainder = g(hi).abs() / rate;
            if remainder <= TAIL_REL * total.value.abs() || remainder < 1e-300 {
                return Ok(from_estimate(
                    Estimate {
                        value: total.value,
                        abs_err: total.abs_err + remainder,
                    },
                    Some(hi),
                ));
            }
        }
        lo = hi;
        if !lo.is_finite() {
            break;
        }
    }
    Err(Error::numeric("no truncation point met the tail tolerance", total.abs_err))
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

/// Deserialize a present-but-null field as `Some(None)`.
fn nullable<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Option<f64>>, D::Error> {
    Option::<f64>::deserialize(d).map(Some)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum MeasureWire {
    SymmetricExponential {
        scale: f64,
        #[serde(rename = "M", default, deserialize_with = "nullable", skip_serializing_if = "Option::is_none")]
        m: Option<Option<f64>>,
        #[serde(rename = "R", default, deserialize_with = "nullable", skip_serializing_if = "Option::is_none")]
        r: Option<Option<f64>>,
    },
    GammaLevy {
        rate: f64,
        shape: f64,
        #[serde(rename = "M", default, deserialize_with = "nullable", skip_serializing_if = "Option::is_none")]
        m: Option<Option<f64>>,
        #[serde(rename = "R", default, deserialize_with = "nullable", skip_serializing_if = "Option::is_none")]
        r: Option<Option<f64>>,
    },
    PoissonAtom {
        intensity: f64,
        jump: f64,
        #[serde(rename = "M", default, deserialize_with = "nullable", skip_serializing_if = "Option::is_none")]
        m: Option<Option<f64>>,
        #[serde(rename = "R", default, deserialize_with = "nullable", skip_serializing_if = "Option::is_none")]
        r: Option<Option<f64>>,
    },
    CompoundPoisson {
        rate: f64,
        jumps: JumpLaw,
        #[serde(rename = "M", default, deserialize_with = "nullable", skip_serializing_if = "Option::is_none")]
        m: Option<Option<f64>>,
        #[serde(rename = "R", default, deserialize_with = "nullable", skip_serializing_if = "Option::is_none")]
        r: Option<Option<f64>>,
    },
    CustomDensity {
        #[serde(rename = "M", default, deserialize_with = "nullable")]
        m: Option<Option<f64>>,
        #[serde(rename = "R", default, deserialize_with = "nullable")]
        r: Option<Option<f64>>,
        density_table: Vec<(f64, f64)>,
    },
}

fn declared_to_f64(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::INFINITY)
}

fn f64_to_declared(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn check_declared(name: &str, declared: Option<Option<f64>>, analytic: f64) -> Result<()> {
    if let Some(d) = declared {
        let d = declared_to_f64(d);
        let agree = (d.is_infinite() && analytic.is_infinite() && d.signum() == analytic.signum())
            || (d - analytic).abs() <= 1e-12 * analytic.abs().max(1.0);
        if !agree {
            return Err(Error::config(format!(
                "declared {name} = {d} conflicts with the analytic value {analytic}"
            )));
        }
    }
    Ok(())
}

impl TryFrom<MeasureWire> for LevyMeasure1D {
    type Error = Error;

    fn try_from(w: MeasureWire) -> Result<Self> {
        let (measure, m, r) = match w {
            MeasureWire::SymmetricExponential { scale, m, r } => {
                (LevyMeasure1D::symmetric_exponential(scale)?, m, r)
            }
            MeasureWire::GammaLevy { rate, shape, m, r } => (LevyMeasure1D::gamma_levy(rate, shape)?, m, r),
            MeasureWire::PoissonAtom { intensity, jump, m, r } => {
                (LevyMeasure1D::poisson_atom(intensity, jump)?, m, r)
            }
            MeasureWire::CompoundPoisson { rate, jumps, m, r } => {
                (LevyMeasure1D::compound_poisson(rate, jumps)?, m, r)
            }
            MeasureWire::CustomDensity { m, r, density_table } => {
                let m = m.ok_or_else(|| Error::config("custom_density must declare \"M\""))?;
                let r = r.ok_or_else(|| Error::config("custom_density must declare \"R\""))?;
                let c = CustomDensity::from_table(density_table, declared_to_f64(m), declared_to_f64(r))?;
                return Ok(LevyMeasure1D::CustomDensity(c));
            }
        };
        check_declared("M", m, measure.exp_moment_abscissa())?;
        check_declared("R", r, measure.support_radius())?;
        Ok(measure)
    }
}

impl LevyMeasure1D {
    fn to_wire(&self) -> Result<MeasureWire> {
        Ok(match self {
            LevyMeasure1D::SymmetricExponential { scale } => MeasureWire::SymmetricExponential {
                scale: *scale,
                m: None,
                r: None,
            },
            LevyMeasure1D::GammaLevy { rate, shape } => MeasureWire::GammaLevy {
                rate: *rate,
                shape: *shape,
                m: None,
                r: None,
            },
            LevyMeasure1D::PoissonAtom { intensity, jump } => MeasureWire::PoissonAtom {
                intensity: *intensity,
                jump: *jump,
                m: None,
                r: None,
            },
            LevyMeasure1D::CompoundPoisson { rate, jumps } => MeasureWire::CompoundPoisson {
                rate: *rate,
                jumps: jumps.clone(),
                m: None,
                r: None,
            },
            LevyMeasure1D::CustomDensity(c) => match &c.source {
                DensitySource::Table(t) => MeasureWire::CustomDensity {
                    m: Some(f64_to_declared(c.m)),
                    r: Some(f64_to_declared(c.r)),
                    density_table: t.clone(),
                },
                DensitySource::Function { .. } => {
                    return Err(Error::Unsupported("function-backed custom densities cannot be serialized".into()))
                }
            },
        })
    }

    /// Parse the JSON measure description.
    pub fn from_json(s: &str) -> Result<Self> {
        let w: MeasureWire =
            serde_json::from_str(s).map_err(|e| Error::config(format!("invalid measure JSON: {e}")))?;
        w.try_into()
    }
}

impl Serialize for LevyMeasure1D {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_wire().map_err(serde::ser::Error::custom)?.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LevyMeasure1D {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = MeasureWire::deserialize(d)?;
        w.try_into().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplace() -> LevyMeasure1D {
        LevyMeasure1D::symmetric_exponential(1.0).unwrap()
    }

    #[test]
    fn symmetric_exponential_closed_forms() {
        let m = laplace();
        assert_relative_eq!(m.exp_moment_integral(0.5, 1.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(m.exp_moment_integral(0.5, 3.0).unwrap(), 28.0, max_relative = 1e-14);
        assert_relative_eq!(m.poly_moment(2.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(m.poly_moment(4.0).unwrap(), 12.0, max_relative = 1e-14);
        assert_eq!(m.exp_moment_abscissa(), 1.0);
        assert_eq!(m.support_radius(), f64::INFINITY);
    }

    #[test]
    fn zero_t_gives_zero() {
        for m in [
            laplace(),
            LevyMeasure1D::poisson_atom(1.0, 1.0).unwrap(),
            LevyMeasure1D::compound_poisson(1.0, JumpLaw::Uniform { lo: -0.5, hi: 0.5 }).unwrap(),
        ] {
            assert_eq!(m.exp_moment_integral(0.0, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn poisson_atom_values() {
        let m = LevyMeasure1D::poisson_atom(1.0, 1.0).unwrap();
        assert_relative_eq!(
            m.exp_moment_integral(1.0, 1.0).unwrap(),
            std::f64::consts::E - 1.0,
            max_relative = 1e-14
        );
        let m = LevyMeasure1D::poisson_atom(2.0, 3.0).unwrap();
        assert_eq!(m.poly_moment(2.0).unwrap(), 18.0);
        assert_eq!(m.exp_moment_abscissa(), f64::INFINITY);
        assert_eq!(LevyMeasure1D::poisson_atom(1.0, 1.0).unwrap().support_radius(), 1.0);
    }

    #[test]
    fn gamma_abscissa() {
        assert_eq!(LevyMeasure1D::gamma_levy(2.5, 1.0).unwrap().exp_moment_abscissa(), 2.5);
    }

    #[test]
    fn compound_poisson_radius() {
        let m = LevyMeasure1D::compound_poisson(1.0, JumpLaw::Uniform { lo: -0.5, hi: 0.5 }).unwrap();
        assert_eq!(m.support_radius(), 0.5);
        assert!(m.is_symmetric());
    }

    #[test]
    fn beyond_abscissa_is_domain_error() {
        let err = laplace().exp_moment_integral(1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain(ref s) if s.contains("beyond exponential-moment abscissa")));
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let tol = Tolerance::new(1e-13, 1e-11);
        for m in [
            laplace(),
            LevyMeasure1D::symmetric_exponential(0.3).unwrap(),
            LevyMeasure1D::gamma_levy(2.5, 1.7).unwrap(),
        ] {
            let big_m = m.exp_moment_abscissa();
            for frac in [0.01, 0.3, 0.9, 0.999] {
                let t = frac * big_m;
                for r in [1.0, 3.0] {
                    let closed = m.exp_moment_integral(t, r).unwrap();
                    let quad = m.exp_moment_integral_quadrature(t, r, tol).unwrap();
                    assert_relative_eq!(closed, quad, max_relative = 1e-8);
                }
            }
            for q in [2.0, 4.0] {
                assert_relative_eq!(
                    m.poly_moment(q).unwrap(),
                    m.poly_moment_quadrature(q, tol).unwrap(),
                    max_relative = 1e-8
                );
            }
        }
    }

    #[test]
    fn truncation_point_is_recorded() {
        let m = laplace();
        let i = m
            .integrate(|u| u * u, Growth::poly(2.0), Tolerance::default())
            .unwrap();
        let cutoff = i.cutoff.unwrap();
        // e^{-U} U < 1e-12 * 2 needs U around 30
        assert!(cutoff > 20.0 && cutoff < 200.0, "cutoff {cutoff}");
        assert_relative_eq!(i.value, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn custom_table_requires_declarations() {
        let err = LevyMeasure1D::from_json(r#"{"family":"custom_density","R":null,"density_table":[[0.1,1.0],[1.0,1.0]]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("\"M\"")));
        let ok = LevyMeasure1D::from_json(r#"{"family":"custom_density","M":1.0,"R":null,"density_table":[[0.1,1.0],[1.0,1.0]]}"#)
            .unwrap();
        assert_eq!(ok.support_radius(), f64::INFINITY);
        assert_eq!(ok.exp_moment_abscissa(), 1.0);
    }

    #[test]
    fn custom_table_declared_radius_too_small() {
        let err = LevyMeasure1D::from_json(
            r#"{"family":"custom_density","M":1.0,"R":0.5,"density_table":[[0.1,1.0],[1.0,1.0]]}"#,
        )
        .unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn custom_function_infinite_variation_rejected() {
        let k: DensityFn = Arc::new(|u: f64| 1.0 / (u * u));
        let err = CustomDensity::from_fn(k, 0.0, 1.0, f64::INFINITY, 1.0).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        let k: DensityFn = Arc::new(|u: f64| (-u).exp() / u);
        assert!(CustomDensity::from_fn(k, 0.0, 5.0, f64::INFINITY, 5.0).is_ok());
    }

    #[test]
    fn json_round_trip_and_conflicting_declaration() {
        let m = LevyMeasure1D::from_json(r#"{"family":"symmetric_exponential","scale":1.0}"#).unwrap();
        let back = serde_json::to_string(&m).unwrap();
        assert_eq!(back, r#"{"family":"symmetric_exponential","scale":1.0}"#);
        let err = LevyMeasure1D::from_json(r#"{"family":"poisson_atom","intensity":1.0,"jump":1.0,"R":2.0}"#)
            .unwrap_err();
        assert!(err.is_config());
        let cp = LevyMeasure1D::from_json(
            r#"{"family":"compound_poisson","rate":3.0,"jumps":{"law":"uniform","lo":0.0,"hi":1.0}}"#,
        )
        .unwrap();
        assert_relative_eq!(cp.poly_moment(2.0).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn levy_condition_finite() {
        assert!(laplace().levy_condition_integral().unwrap().is_finite());
    }
}

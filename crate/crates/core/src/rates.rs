//! Rate functions for each bound family and the certificates built
//! from them.
//!
//! Every rate here has the form
//! `h(t) = ∫ w(|u|) |u| (e^{t|u|} - 1) ν̃(du)` with a nonnegative,
//! `t`-independent weight `w`, so `h(0) = 0` and `h` is nondecreasing.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{BoundCertificate, Centering, Direction};
use crate::error::{Error, Result};
use crate::levy::LevyMeasure1D;
use crate::numerics::{
    chernoff_bound, chernoff_bound_with, constrained_chernoff, NumericConfig, find_t, probability_from_neg_log, InputRecord, Provenance,
    RateFunction,
};
use crate::quadrature::Tolerance;
use crate::vector::{Coordinate, IdVectorSpec};

/// A moment input with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub value: f64,
    pub source: Provenance,
}

impl Moment {
    pub fn analytic(value: f64) -> Self {
        Moment {
            value,
            source: Provenance::Analytic,
        }
    }

    fn record(&self, quantity: &str) -> InputRecord {
        InputRecord {
            quantity: quantity.to_string(),
            value: self.value,
            source: self.source.clone(),
        }
    }
}

/// Moment inputs consumed by the rate functions. Monte Carlo entries hold
/// the conservative end of their interval: lower for quantities that sit in
/// denominators (`m_p`, `l`, norms), upper for `m_2p` and `m̄_2p`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub p: f64,
    /// `E|X_1|^p`
    pub m_p: Option<Moment>,
    /// `E|X_1|^{2p}`
    pub m_2p: Option<Moment>,
    /// `-log E e^{-X_1²}`
    pub l: Option<Moment>,
    /// `E‖X‖_p`
    pub e_norm_p: Option<Moment>,
    /// `E X_1²`
    pub e_x1_sq: Option<Moment>,
    pub mod_m_p_lower: Option<Moment>,
    pub mod_m_2p_upper: Option<Moment>,
}

fn require<'a>(m: &'a Option<Moment>, name: &str) -> Result<&'a Moment> {
    m.as_ref()
        .ok_or_else(|| Error::config(format!("moment input {name} is required for this bound")))
}

impl MomentSet {
    pub fn new(p: f64) -> Self {
        MomentSet {
            p,
            ..Default::default()
        }
    }

    /// `m_2p >= m_p²` (Cauchy–Schwarz on `|X_1|^p`) and `l > 0`.
    pub fn validate(&self) -> Result<()> {
        if let (Some(a), Some(b)) = (&self.m_p, &self.m_2p) {
            if b.value < a.value * a.value * (1.0 - 1e-12) {
                return Err(Error::config(format!(
                    "m_2p = {} < m_p² = {} violates Cauchy–Schwarz",
                    b.value,
                    a.value * a.value
                )));
            }
        }
        if let Some(l) = &self.l {
            if !(l.value > 0.0) {
                return Err(Error::config(format!("l = {} must be positive (degenerate X_1)", l.value)));
            }
        }
        Ok(())
    }
}

fn check_p(p: f64, min: f64) -> Result<()> {
    if !(p >= min && p.is_finite()) {
        return Err(Error::config(format!("norm order p = {p} must be >= {min}")));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::config(format!("{name} = {v} must be positive and finite")));
    }
    Ok(())
}

/// `h(t) = p²[pre·∫(base + slope|u|)^{2p-2}|u|(e^{t|u|}-1)ν̃(du) + constant·∫|u|(e^{t|u|}-1)ν̃(du)]`.
///
/// The `u`-dependent weight goes through the measure quadrature; the
/// constant term factors out.
fn polynomial_weight_rate(
    label: &str,
    m: &LevyMeasure1D,
    p: f64,
    base: f64,
    slope: f64,
    pre: f64,
    constant: f64,
) -> RateFunction {
    let measure = m.clone();
    let k = 2.0 * p - 2.0;
    let tol = Tolerance::default();
    RateFunction::new(label, m.exp_moment_abscissa(), move |t| {
        let weighted = measure.weighted_exp_moment(t, 1.0, |a| pre * (base + slope * a).powf(k), k, tol)?;
        let flat = if constant == 0.0 {
            0.0
        } else {
            constant * measure.exp_moment_integral(t, 1.0)?
        };
        Ok(p * p * (weighted + flat))
    })
    .with_param("p", p)
    .with_param("weight_base", base)
    .with_param("weight_slope", slope)
    .with_param("weight_prefactor", pre)
    .with_param("constant", constant)
}

/// Euclidean-norm rate `g` with
/// `g(t) = (8 + 12 log 2 / l)·∫|u|(e^{t|u|}-1)ν̃ + (8/l)·∫|u|³(e^{t|u|}-1)ν̃`.
pub fn rate_thm1(m: &LevyMeasure1D, l: f64) -> Result<RateFunction> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::config(format!("l = {l} must be positive")));
    }
    let a = 8.0 + 12.0 * LN_2 / l;
    let b = 8.0 / l;
    let measure = m.clone();
    Ok(RateFunction::new("thm1", m.exp_moment_abscissa(), move |t| {
        Ok(a * measure.exp_moment_integral(t, 1.0)? + b * measure.exp_moment_integral(t, 3.0)?)
    })
    .with_param("l", l)
    .with_param("coef_r1", a)
    .with_param("coef_r3", b))
}

/// ℓ^p rate for symmetric or nonnegative coordinates, `p >= 2`:
/// weight `(1 + 4^{1/p}|u|/m_p^{1/p})^{2p-2} + 2^{2p+1} m_2p/m_p²`.
pub fn rate_thm2(c: &Coordinate, p: f64, m_p: f64, m_2p: f64) -> Result<RateFunction> {
    check_p(p, 2.0)?;
    if !(m_p > 0.0) {
        return Err(Error::config(format!("m_p = {m_p} must be positive")));
    }
    positive("m_2p", m_2p)?;
    if !(c.is_symmetric() || c.is_nonnegative()) {
        return Err(Error::Unsupported(
            "coordinate law is neither symmetric nor nonnegative; use the general-case rate (thm5_general)".into(),
        ));
    }
    let slope = 4f64.powf(1.0 / p) / m_p.powf(1.0 / p);
    let constant = 2f64.powf(2.0 * p + 1.0) * m_2p / (m_p * m_p);
    Ok(polynomial_weight_rate("thm2", &c.measure, p, 1.0, slope, 1.0, constant))
}

/// ℓ^p rate for a.s. nonnegative coordinates, `p >= 2`: weight
/// `(2^{-1/p} + u/m_p^{1/p})^{2p-2} + 4(1 + 2^{-1/p})^{2p-2} m_2p/m_p²`.
pub fn rate_thm5_positive(c: &Coordinate, p: f64, m_p: f64, m_2p: f64) -> Result<RateFunction> {
    check_p(p, 2.0)?;
    if !(m_p > 0.0) {
        return Err(Error::config(format!("m_p = {m_p} must be positive")));
    }
    positive("m_2p", m_2p)?;
    if !c.is_nonnegative() {
        return Err(Error::Unsupported(
            "positive-case rate needs a.s. nonnegative coordinates; use thm5_general".into(),
        ));
    }
    let base = 2f64.powf(-1.0 / p);
    let slope = 1.0 / m_p.powf(1.0 / p);
    let constant = 4.0 * (1.0 + base).powf(2.0 * p - 2.0) * m_2p / (m_p * m_p);
    Ok(polynomial_weight_rate("thm5_positive", &c.measure, p, base, slope, 1.0, constant))
}

/// General-case ℓ^p rate with modified moments: weight
/// `pre·(1 + 2^{1/p}|u|/m̲_p^{1/p})^{2p-2} + 2^{2p} m̄_2p/m̲_p²`, where
/// `pre = 1` for `p >= 2` and `pre = d^{2/p-1}` for `1 <= p < 2`.
pub fn rate_thm5_general(
    m: &LevyMeasure1D,
    p: f64,
    mod_m_p_lower: f64,
    mod_m_2p_upper: f64,
    d: Option<usize>,
) -> Result<RateFunction> {
    check_p(p, 1.0)?;
    if !(mod_m_p_lower > 0.0) {
        return Err(Error::Domain(
            "modified moment vanishes; use the positive-case rate if coordinates are nonnegative".into(),
        ));
    }
    positive("mod_m_2p_upper", mod_m_2p_upper)?;
    let pre = if p < 2.0 {
        let d = d.ok_or_else(|| Error::config("dimension d is required when p < 2"))?;
        (d as f64).powf(2.0 / p - 1.0)
    } else {
        1.0
    };
    let slope = 2f64.powf(1.0 / p) / mod_m_p_lower.powf(1.0 / p);
    let constant = 2f64.powf(2.0 * p) * mod_m_2p_upper / (mod_m_p_lower * mod_m_p_lower);
    let mut h = polynomial_weight_rate("thm5_general", m, p, 1.0, slope, pre, constant);
    if let (true, Some(d)) = (p < 2.0, d) {
        h = h.with_param("d", d as f64);
    }
    Ok(h)
}

/// `h(t) = 8∫|u|(e^{t|u|}-1)ν̃ + (2d/(ε E‖X‖_2)²)∫|u|³(e^{t|u|}-1)ν̃`.
pub fn rate_thm4(m: &LevyMeasure1D, d: usize, eps: f64, e_norm_2: f64) -> Result<RateFunction> {
    positive("eps", eps)?;
    positive("E‖X‖_2", e_norm_2)?;
    let b = 2.0 * d as f64 / (eps * e_norm_2).powi(2);
    let measure = m.clone();
    Ok(RateFunction::new("thm4", m.exp_moment_abscissa(), move |t| {
        Ok(8.0 * measure.exp_moment_integral(t, 1.0)? + b * measure.exp_moment_integral(t, 3.0)?)
    })
    .with_param("d", d as f64)
    .with_param("eps", eps)
    .with_param("coef_r3", b))
}

/// Orthogonal projection onto a subspace, described by the column norms
/// `π_k = ‖Π_S e_k‖_2`, plus the offset `E` (or `ε`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub col_norms: Vec<f64>,
    pub offset: f64,
}

impl ProjectionSpec {
    pub fn new(col_norms: Vec<f64>, offset: f64) -> Result<Self> {
        if col_norms.is_empty() {
            return Err(Error::config("projection needs at least one column"));
        }
        if let Some(bad) = col_norms.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::config(format!("projection column norm {bad} is outside [0, 1]")));
        }
        positive("projection offset", offset)?;
        Ok(ProjectionSpec { col_norms, offset })
    }

    /// From a full `d × d` matrix (row-major). Checks that it is an
    /// orthogonal projection: symmetric, idempotent, and `Σπ_k²` equal to its
    /// (integer) trace.
    pub fn from_matrix(matrix: &[Vec<f64>], offset: f64) -> Result<Self> {
        let d = matrix.len();
        if matrix.iter().any(|row| row.len() != d) {
            return Err(Error::config("projection matrix must be square"));
        }
        let tol = 1e-9;
        for i in 0..d {
            for j in 0..d {
                if (matrix[i][j] - matrix[j][i]).abs() > tol {
                    return Err(Error::config("projection matrix is not symmetric"));
                }
                let sq: f64 = (0..d).map(|k| matrix[i][k] * matrix[k][j]).sum();
                if (sq - matrix[i][j]).abs() > tol {
                    return Err(Error::config("projection matrix is not idempotent"));
                }
            }
        }
        let col_norms: Vec<f64> = (0..d)
            .map(|k| (0..d).map(|i| matrix[i][k] * matrix[i][k]).sum::<f64>().sqrt().min(1.0))
            .collect();
        let trace: f64 = (0..d).map(|i| matrix[i][i]).sum();
        let sum_sq: f64 = col_norms.iter().map(|v| v * v).sum();
        if (trace - trace.round()).abs() > 1e-6 || (sum_sq - trace).abs() > 1e-6 {
            return Err(Error::config(format!(
                "Σπ_k² = {sum_sq} does not equal the subspace dimension {trace}"
            )));
        }
        ProjectionSpec::new(col_norms, offset)
    }

    pub fn dim(&self) -> usize {
        self.col_norms.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionVariant {
    /// Offset is `E`; independent coordinates.
    Cor3,
    /// Offset is `ε`; i.i.d. centered coordinates with `E X_1² = e_x1_sq`.
    Cor4 { e_x1_sq: f64 },
}

/// Rate for `‖Π_S X‖_2`. `measures` holds one law (i.i.d.) or one per
/// coordinate.
pub fn rate_projection(
    measures: &[LevyMeasure1D],
    proj: &ProjectionSpec,
    variant: ProjectionVariant,
) -> Result<RateFunction> {
    let d = proj.dim();
    if measures.len() != 1 && measures.len() != d {
        return Err(Error::config(format!(
            "{} coordinate laws for a projection of dimension {d}",
            measures.len()
        )));
    }
    let t_max = measures
        .iter()
        .map(|m| m.exp_moment_abscissa())
        .fold(f64::INFINITY, f64::min);
    match variant {
        ProjectionVariant::Cor3 => {
            let e = proj.offset;
            let fourth: Vec<f64> = proj.col_norms.iter().map(|v| v.powi(4)).collect();
            let ms = measures.to_vec();
            Ok(RateFunction::new("cor3", t_max, move |t| {
                if ms.len() == 1 {
                    let s: f64 = fourth.iter().sum();
                    return Ok(8.0 * ms[0].exp_moment_integral(t, 1.0)?
                        + 2.0 / (e * e) * s * ms[0].exp_moment_integral(t, 3.0)?);
                }
                let mut max1 = 0.0f64;
                let mut sum3 = 0.0;
                for (m, w) in ms.iter().zip(&fourth) {
                    max1 = max1.max(m.exp_moment_integral(t, 1.0)?);
                    if *w > 0.0 {
                        sum3 += w * m.exp_moment_integral(t, 3.0)?;
                    }
                }
                Ok(8.0 * max1 + 2.0 / (e * e) * sum3)
            })
            .with_param("E", e)
            .with_param("d", d as f64))
        }
        ProjectionVariant::Cor4 { e_x1_sq } => {
            if measures.len() != 1 {
                return Err(Error::config("cor4 needs i.i.d. coordinates"));
            }
            positive("E X_1²", e_x1_sq)?;
            let eps = proj.offset;
            let b = 2.0 / (eps * eps * e_x1_sq);
            let m = measures[0].clone();
            Ok(RateFunction::new("cor4", t_max, move |t| {
                Ok(8.0 * m.exp_moment_integral(t, 1.0)? + b * m.exp_moment_integral(t, 3.0)?)
            })
            .with_param("eps", eps)
            .with_param("coef_r3", b))
        }
    }
}

/// `h(t) = p²∫(1 + |u| d^{1/(2p-2)}/(ε E‖X‖_p))^{2p-2}|u|(e^{t|u|}-1)ν̃(du)`.
pub fn rate_cor5(m: &LevyMeasure1D, p: f64, d: usize, eps: f64, e_norm_p: f64) -> Result<RateFunction> {
    check_p(p, 2.0)?;
    positive("eps", eps)?;
    positive("E‖X‖_p", e_norm_p)?;
    let slope = (d as f64).powf(1.0 / (2.0 * p - 2.0)) / (eps * e_norm_p);
    Ok(polynomial_weight_rate("cor5", m, p, 1.0, slope, 1.0, 0.0)
        .with_param("d", d as f64)
        .with_param("eps", eps))
}

/// Variance proxy and range of the bounded-support bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cor2Constants {
    pub v_sq: f64,
    pub r: f64,
}

/// `V_ε² = 8 max_k ∫u²ν̃_k + (2/(ε E‖X‖_2)²) Σ_k ∫u⁴ν̃_k` and `R = max_k R_k`.
pub fn cor2_constants(measures: &[LevyMeasure1D], d: usize, eps: f64, e_norm_2: f64) -> Result<Cor2Constants> {
    positive("eps", eps)?;
    positive("E‖X‖_2", e_norm_2)?;
    if measures.len() != 1 && measures.len() != d {
        return Err(Error::config(format!("{} coordinate laws for dimension {d}", measures.len())));
    }
    let r = measures.iter().map(|m| m.support_radius()).fold(0.0, f64::max);
    if !r.is_finite() {
        return Err(Error::domain("bounded-support bound needs every R_k finite"));
    }
    let mut max2 = 0.0f64;
    let mut sum4 = 0.0;
    for m in measures {
        max2 = max2.max(m.poly_moment(2.0)?);
        sum4 += m.poly_moment(4.0)?;
    }
    if measures.len() == 1 {
        sum4 *= d as f64;
    }
    Ok(Cor2Constants {
        v_sq: 8.0 * max2 + 2.0 / (eps * e_norm_2).powi(2) * sum4,
        r,
    })
}

/// `-log` of `e^{x/R - (x/R + V²/R²) log(1 + R x/V²)}`.
pub fn bennett_neg_log(v_sq: f64, r: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x / r + v_sq / (r * r)) * (r * x / v_sq).ln_1p() - x / r
}

/// `h₀(t) = V²(e^{tR} - 1)/R`, whose Chernoff transform is the
/// bounded-support closed form.
pub fn bennett_rate(v_sq: f64, r: f64) -> RateFunction {
    RateFunction::new("bennett_h0", f64::INFINITY, move |t| Ok(v_sq * (t * r).exp_m1() / r))
        .with_param("V_sq", v_sq)
        .with_param("R", r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cor2Value {
    pub neg_log: f64,
    /// Same quantity through the generic Chernoff pipeline.
    pub neg_log_generic: f64,
    pub constants: Cor2Constants,
}

impl Cor2Value {
    pub fn probability(&self) -> f64 {
        probability_from_neg_log(self.neg_log)
    }
}

/// Closed-form bounded-support bound at deviation `x >= 0`, cross-checked
/// against the generic pipeline on `h₀` to `1e-6` relative in `-log` space.
pub fn bound_cor2(measures: &[LevyMeasure1D], d: usize, eps: f64, e_norm_2: f64, x: f64) -> Result<Cor2Value> {
    let constants = cor2_constants(measures, d, eps, e_norm_2)?;
    cor2_value(constants, x)
}

fn cor2_value(constants: Cor2Constants, x: f64) -> Result<Cor2Value> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("deviation x = {x} must be nonnegative")));
    }
    let neg_log = bennett_neg_log(constants.v_sq, constants.r, x);
    let generic = chernoff_bound(&bennett_rate(constants.v_sq, constants.r), x)?.neg_log;
    let scale = neg_log.abs().max(generic.abs());
    if (neg_log - generic).abs() > 1e-6 * scale + 1e-12 {
        return Err(Error::numeric(
            format!("closed form {neg_log} and generic pipeline {generic} disagree at x = {x}"),
            (neg_log - generic).abs() / scale,
        ));
    }
    Ok(Cor2Value {
        neg_log,
        neg_log_generic: generic,
        constants,
    })
}

/// Integrability threshold for bounded-support measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm3Report {
    pub v_sq: f64,
    pub r: f64,
    pub lambda_max: f64,
    pub statement: String,
}

/// `V² = 8∫u²ν̃`, `λ_max = R²/(e V²)`.
pub fn thm3_report(m: &LevyMeasure1D) -> Result<Thm3Report> {
    let r = m.support_radius();
    if !r.is_finite() {
        return Err(Error::domain("integrability threshold needs a bounded support (R = ∞)"));
    }
    let v_sq = 8.0 * m.poly_moment(2.0)?;
    let lambda_max = r * r / (std::f64::consts::E * v_sq);
    Ok(Thm3Report {
        v_sq,
        r,
        lambda_max,
        statement: format!(
            "E[exp((‖X‖_2/R)·log(λ‖X‖_2/R))] < ∞ for every λ < {lambda_max:.6e} (R = {r}, V² = {v_sq})"
        ),
    })
}

const VALIDITY_NOTE: &str =
    "validity range taken as 0 < x < h(M⁻); the alternative reading 0 < x < h^{-1}(M⁻) is not used";

/// Generic certificate: `bound(x) = exp(-∫_0^x h^{-1})` on every grid point.
pub fn certify_rate(
    family: &str,
    measure_family: &str,
    rate: &RateFunction,
    p: f64,
    centering: Centering,
    direction: Direction,
    x_grid: &[f64],
) -> Result<BoundCertificate> {
    certify_rate_with(family, measure_family, rate, p, centering, direction, x_grid, &NumericConfig::default())
}

/// [`certify_rate`] with explicit outer tolerances.
#[allow(clippy::too_many_arguments)]
pub fn certify_rate_with(
    family: &str,
    measure_family: &str,
    rate: &RateFunction,
    p: f64,
    centering: Centering,
    direction: Direction,
    x_grid: &[f64],
    cfg: &NumericConfig,
) -> Result<BoundCertificate> {
    let sup = rate.validity_sup()?;
    if let Some(x) = x_grid.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::domain(format!("deviation x = {x} must be nonnegative")));
    }
    if let Some(x) = x_grid.iter().find(|x| **x >= sup) {
        return Err(Error::range(
            format!("{family}: x = {x} is not below h(M⁻)"),
            sup,
        ));
    }
    let neg_log: Vec<f64> = x_grid
        .par_iter()
        .map(|&x| chernoff_bound_with(rate, x, cfg).map(|v| v.neg_log))
        .collect::<Result<_>>()?;
    let cert = BoundCertificate {
        family: family.to_string(),
        measure_family: measure_family.to_string(),
        rate: rate.info(),
        norm_p: p,
        direction,
        centering,
        x_grid: x_grid.to_vec(),
        bound: neg_log.iter().map(|v| probability_from_neg_log(*v)).collect(),
        neg_log_bound: neg_log,
        validity_sup: sup.is_finite().then_some(sup),
        dimension_dependent: false,
        notes: vec![VALIDITY_NOTE.to_string()],
    };
    cert.check()?;
    Ok(cert)
}

/// Euclidean-norm certificate with the constrained Legendre transform:
/// `bound(x) = exp(-sup_{0<=t<=T}[t x - ∫_0^t 2g])`, `T` from [`find_t`].
pub fn bound_thm1(spec: &IdVectorSpec, moments: &MomentSet, x_grid: &[f64]) -> Result<BoundCertificate> {
    let c = spec.iid_coordinate()?;
    let l = require(&moments.l, "l")?;
    let g = rate_thm1(&c.measure, l.value)?.with_input(l.record("l"));
    let mut cap = find_t(&g)?;
    let mut notes = Vec::new();
    if cap >= g.t_max() {
        cap = g.t_edge();
        notes.push("t·g(t) stays below 1/2 up to M; T taken just below M".to_string());
    }
    let g = g.with_param("T", cap);
    if let Some(x) = x_grid.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::domain(format!("deviation x = {x} must be nonnegative")));
    }
    let neg_log: Vec<f64> = x_grid
        .par_iter()
        .map(|&x| constrained_chernoff(&g, cap, x).map(|v| v.neg_log))
        .collect::<Result<_>>()?;
    let cert = BoundCertificate {
        family: "thm1".into(),
        measure_family: c.measure.family_name().into(),
        rate: g.info(),
        norm_p: 2.0,
        direction: Direction::Upper,
        centering: Centering::mean(2.0),
        x_grid: x_grid.to_vec(),
        bound: neg_log.iter().map(|v| probability_from_neg_log(*v)).collect(),
        neg_log_bound: neg_log,
        validity_sup: None,
        dimension_dependent: false,
        notes,
    };
    cert.check()?;
    Ok(cert)
}

/// Closed-form bounded-support certificate, centered at `(1+ε)E‖X‖_2`.
pub fn certify_cor2(
    spec: &IdVectorSpec,
    eps: f64,
    moments: &MomentSet,
    x_grid: &[f64],
) -> Result<BoundCertificate> {
    let e = require(&moments.e_norm_p, "E‖X‖_2")?;
    let measures: Vec<LevyMeasure1D> = spec.distinct().iter().map(|c| c.measure.clone()).collect();
    let constants = cor2_constants(&measures, spec.dim(), eps, e.value)?;
    let values: Vec<Cor2Value> = x_grid
        .par_iter()
        .map(|&x| cor2_value(constants, x))
        .collect::<Result<_>>()?;
    let neg_log: Vec<f64> = values.iter().map(|v| v.neg_log).collect();
    let rate = bennett_rate(constants.v_sq, constants.r)
        .with_param("eps", eps)
        .with_param("d", spec.dim() as f64)
        .with_input(e.record("E‖X‖_2"));
    let mut info = rate.info();
    info.label = "cor2".into();
    let cert = BoundCertificate {
        family: "cor2".into(),
        measure_family: spec.coordinate(0).measure.family_name().into(),
        rate: info,
        norm_p: 2.0,
        direction: Direction::Upper,
        centering: Centering::scaled_mean(2.0, 1.0 + eps).with_value(e.value, e.source.clone()),
        x_grid: x_grid.to_vec(),
        bound: neg_log.iter().map(|v| probability_from_neg_log(*v)).collect(),
        neg_log_bound: neg_log,
        validity_sup: None,
        dimension_dependent: false,
        notes: vec!["rate h₀(t) = V²(e^{tR} - 1)/R".into()],
    };
    cert.check()?;
    Ok(cert)
}

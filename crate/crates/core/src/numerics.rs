//! Turning a rate function `h` into a tail bound.
//!
//! A rate function is nondecreasing with `h(0) = 0`; the associated bound is
//! `exp(-∫_0^x h^{-1}(s) ds)`, which is also the Legendre transform
//! `exp(-sup_t [t x - ∫_0^t h])`. Both forms are computed and cross-checked.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

/// Fraction of `t_max` kept away from a finite exponential-moment abscissa.
pub const EDGE_FRACTION: f64 = 1e-9;

/// Absolute accuracy floor for `-log` bound values. An error this size
/// changes no reported probability.
pub const NEG_LOG_ABS: f64 = 1e-15;

/// Where a numeric input to a rate function came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    MonteCarlo {
        seed: u64,
        n: u64,
        confidence: f64,
        /// Which end of the interval was used: `lower`, `upper` or `point`.
        side: String,
    },
    Declared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub quantity: String,
    pub value: f64,
    pub source: Provenance,
}

impl InputRecord {
    pub fn analytic(quantity: &str, value: f64) -> Self {
        InputRecord {
            quantity: quantity.to_string(),
            value,
            source: Provenance::Analytic,
        }
    }
}

pub type RateEval = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// A nondecreasing `h` on `[0, t_max)` with `h(0) = 0`.
///
/// Evaluations are memoized by exact argument; the table is shared between
/// clones and guarded by a mutex.
#[derive(Clone)]
pub struct RateFunction {
    eval: RateEval,
    t_max: f64,
    label: String,
    params: BTreeMap<String, f64>,
    provenance: Vec<InputRecord>,
    memo: Arc<Mutex<HashMap<u64, f64>>>,
}

impl fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateFunction")
            .field("label", &self.label)
            .field("t_max", &self.t_max)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

/// Serializable description of a rate function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateInfo {
    pub label: String,
    pub t_max: Option<f64>,
    pub params: BTreeMap<String, f64>,
    pub inputs: Vec<InputRecord>,
}

impl RateFunction {
    pub fn new<F>(label: impl Into<String>, t_max: f64, eval: F) -> Self
    where
        F: Fn(f64) -> Result<f64> + Send + Sync + 'static,
    {
        RateFunction {
            eval: Arc::new(eval),
            t_max,
            label: label.into(),
            params: BTreeMap::new(),
            provenance: Vec::new(),
            memo: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_input(mut self, input: InputRecord) -> Self {
        self.provenance.push(input);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn inputs(&self) -> &[InputRecord] {
        &self.provenance
    }

    pub fn info(&self) -> RateInfo {
        RateInfo {
            label: self.label.clone(),
            t_max: self.t_max.is_finite().then_some(self.t_max),
            params: self.params.clone(),
            inputs: self.provenance.clone(),
        }
    }

    /// `h(t)` for `0 <= t < t_max`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.t_max) {
            return Err(Error::domain(format!(
                "{}: t = {t} outside [0, {})",
                self.label, self.t_max
            )));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let key = t.to_bits();
        if let Some(v) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(*v);
        }
        let v = (self.eval)(t)?;
        if !v.is_finite() {
            return Err(Error::numeric(format!("{}: h({t}) is not finite", self.label), v));
        }
        self.memo.lock().expect("memo lock").insert(key, v);
        Ok(v)
    }

    /// `h(t)`, with overflow to `+∞` reported as `+∞` instead of an error.
    fn eval_saturating(&self, t: f64) -> Result<f64> {
        match self.eval(t) {
            Err(Error::Numeric { achieved, .. }) if achieved == f64::INFINITY => Ok(f64::INFINITY),
            r => r,
        }
    }

    /// Largest argument the numerics will evaluate at.
    pub fn t_edge(&self) -> f64 {
        if self.t_max.is_finite() {
            self.t_max * (1.0 - EDGE_FRACTION)
        } else {
            f64::INFINITY
        }
    }

    /// `h(t_max⁻)`, the supremum of admissible deviations. For a finite
    /// abscissa this is `h` at `t_max·(1 - 1e-9)`, a lower bound on the true
    /// limit; for an infinite abscissa it is `+∞` provided `h` is unbounded,
    /// which is checked up to `h = 1e300`.
    pub fn validity_sup(&self) -> Result<f64> {
        if self.t_max.is_finite() {
            return self.eval(self.t_edge());
        }
        let mut t = 1.0;
        for _ in 0..2000 {
            let v = self.eval_saturating(t)?;
            if v > 1e300 {
                return Ok(f64::INFINITY);
            }
            t *= 2.0;
            if !t.is_finite() {
                break;
            }
        }
        self.eval(f64::MAX)
    }

    /// `∫_0^t h(s) ds`.
    pub fn integral(&self, t: f64, tol: Tolerance) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let mut err = None;
        let e = quadrature::integrate(
            |s| match self.eval(s) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            t,
            tol,
        );
        if let Some(e) = err {
            return Err(e);
        }
        Ok(e?.value)
    }
}

/// Tolerances for the bound pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericConfig {
    /// Relative tolerance of the outer quadratures (`∫h⁻¹`, `∫h`).
    pub outer_rel: f64,
    /// Agreement required between the integral and sup forms, relative in
    /// `-log` space.
    pub agreement_rel: f64,
    /// Relative bracket width for inversions, in units of the bracket scale.
    pub bracket_rel: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            outer_rel: 1e-10,
            agreement_rel: 1e-6,
            bracket_rel: 1e-12,
        }
    }
}

/// Brent–Dekker root finding on a bracket `[a, b]` with `f(a) <= 0 <= f(b)`.
/// Stops when the bracket is narrower than `xtol` or `f` hits zero.
fn zeroin<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, xtol: f64) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1 * m.signum() };
        fb = f(b)?;
    }
    Err(Error::numeric("root bracketing did not converge", (c - b).abs()))
}

/// Smallest `t` of the form `2^k` (or `t_edge`) with `h(t) >= s`.
fn upper_bracket(h: &RateFunction, s: f64) -> Result<(f64, f64)> {
    let edge = h.t_edge();
    if edge.is_finite() {
        let v = h.eval(edge)?;
        return Ok((edge, v));
    }
    let mut t = 1.0;
    loop {
        let v = h.eval_saturating(t)?;
        if v == f64::INFINITY {
            // overflow: shrink toward the last finite point until h is finite
            let (mut lo, mut hi) = (0.5 * t, t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let vm = h.eval_saturating(mid)?;
                if vm.is_finite() {
                    if vm > s {
                        return Ok((mid, vm));
                    }
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Err(Error::range(format!("{}: h overflows before reaching {s}", h.label()), h.eval(lo)?));
        }
        if v > s {
            return Ok((t, v));
        }
        t *= 2.0;
        if !t.is_finite() {
            return Err(Error::range(format!("{}: h never reaches {s}", h.label()), f64::INFINITY));
        }
    }
}

/// `h^{-1}(s)`: the `t` with `h(t) = s`, bracketed to width
/// `1e-12·t_max` (or `1e-12` times the search bracket when `t_max = ∞`).
pub fn invert_monotone(h: &RateFunction, s: f64) -> Result<f64> {
    invert_with(h, s, &NumericConfig::default())
}

fn invert_with(h: &RateFunction, s: f64, cfg: &NumericConfig) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("cannot invert at s = {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let (hi, h_hi) = upper_bracket(h, s)?;
    if h_hi <= s {
        return Err(Error::range(
            format!("{}: s = {s} is not below h(t_max⁻) = {h_hi}", h.label()),
            h_hi,
        ));
    }
    let scale = if h.t_max().is_finite() { h.t_max() } else { hi };
    zeroin(|t| Ok(h.eval(t)? - s), 0.0, hi, -s, h_hi - s, cfg.bracket_rel * scale)
}

/// Value of a Chernoff-type bound, kept in `-log` space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffValue {
    /// `∫_0^x h^{-1}(s) ds`.
    pub neg_log: f64,
    /// `sup_t [t x - ∫_0^t h]`, the Legendre form.
    pub neg_log_sup: f64,
    /// Maximizing `t` of the Legendre form.
    pub t_star: f64,
}

impl ChernoffValue {
    pub fn probability(&self) -> f64 {
        probability_from_neg_log(self.neg_log)
    }
}

/// `exp(-v)`, clamped below at the smallest positive normal double so the
/// reported probability stays in `(0, 1]`. Clamping upward keeps it a bound.
pub fn probability_from_neg_log(v: f64) -> f64 {
    (-v.max(0.0)).exp().max(f64::MIN_POSITIVE)
}

/// `exp(-∫_0^x h^{-1}(s) ds)` for `0 <= x < h(t_max⁻)`.
///
/// Also evaluates `sup_{0<t<t_max} [t x - ∫_0^t h]` by golden-section search
/// and fails with a numeric error when the two disagree by more than
/// `agreement_rel` in `-log` space.
pub fn chernoff_bound(h: &RateFunction, x: f64) -> Result<ChernoffValue> {
    chernoff_bound_with(h, x, &NumericConfig::default())
}

pub fn chernoff_bound_with(h: &RateFunction, x: f64, cfg: &NumericConfig) -> Result<ChernoffValue> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("deviation x = {x} must be nonnegative")));
    }
    if x == 0.0 {
        return Ok(ChernoffValue {
            neg_log: 0.0,
            neg_log_sup: 0.0,
            t_star: 0.0,
        });
    }
    let (hi, h_hi) = upper_bracket(h, x)?;
    if h_hi <= x {
        return Err(Error::range(
            format!("{}: x = {x} is not below h(t_max⁻)", h.label()),
            h_hi,
        ));
    }

    // integral form
    let tol = Tolerance::new(NEG_LOG_ABS, cfg.outer_rel);
    let mut err = None;
    let integral = quadrature::integrate(
        |s| match invert_with(h, s, cfg) {
            Ok(t) => t,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        x,
        tol,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let neg_log = integral?.value;

    // Legendre form: the objective is concave on [0, hi]
    let objective = |t: f64| -> Result<f64> { Ok(t * x - h.integral(t, tol)?) };
    let (t_star, neg_log_sup) = golden_max(objective, 0.0, hi, cfg.bracket_rel.max(1e-11))?;

    let scale = neg_log.abs().max(neg_log_sup.abs());
    let gap = (neg_log - neg_log_sup).abs();
    if gap > cfg.agreement_rel * scale + 1e-12 {
        return Err(Error::numeric(
            format!(
                "{}: integral form {neg_log} and sup form {neg_log_sup} disagree at x = {x}",
                h.label()
            ),
            gap / scale,
        ));
    }
    Ok(ChernoffValue {
        neg_log,
        neg_log_sup,
        t_star,
    })
}

/// Golden-section maximization of a concave function on `[a, b]`.
fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64, rel: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let width0 = b - a;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = (0.0, 0.0f64.max(f(a).unwrap_or(f64::NEG_INFINITY)));
    for _ in 0..200 {
        if (b - a) <= rel * width0 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (t, v);
        }
    }
    Ok(best)
}

/// `exp(-sup_{0<=t<=T} [t x - ∫_0^t 2 g(s) ds])`, returned in `-log` space
/// together with the maximizing `t`.
///
/// The objective has derivative `x - 2 g(t)`, decreasing in `t`; the
/// supremum sits at `t = T` when `x >= 2 g(T)` and at the root of
/// `2 g(t) = x` otherwise.
pub fn constrained_chernoff(g: &RateFunction, cap: f64, x: f64) -> Result<ChernoffValue> {
    if !(cap > 0.0 && cap < g.t_max()) {
        return Err(Error::config(format!(
            "{}: T = {cap} must lie in (0, {})",
            g.label(),
            g.t_max()
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!("deviation x = {x} must be nonnegative")));
    }
    if x == 0.0 {
        return Ok(ChernoffValue {
            neg_log: 0.0,
            neg_log_sup: 0.0,
            t_star: 0.0,
        });
    }
    let cfg = NumericConfig::default();
    let g_cap = 2.0 * g.eval(cap)?;
    let t_star = if x >= g_cap {
        cap
    } else {
        zeroin(|t| Ok(2.0 * g.eval(t)? - x), 0.0, cap, -x, g_cap - x, cfg.bracket_rel * cap)?
    };
    let tol = Tolerance::new(NEG_LOG_ABS, cfg.outer_rel);
    let value = t_star * x - 2.0 * g.integral(t_star, tol)?;
    Ok(ChernoffValue {
        neg_log: value.max(0.0),
        neg_log_sup: value.max(0.0),
        t_star,
    })
}

/// Largest `T` in `(0, t_max)` with `T·g(T) <= 1/2`, or `t_max` when
/// `t·g(t)` stays below `1/2`. Interior results satisfy
/// `T·g(T) ∈ [1/2 - 1e-9, 1/2]`.
pub fn find_t(g: &RateFunction) -> Result<f64> {
    let phi = |t: f64| -> Result<f64> { Ok(t * g.eval_saturating(t)?) };
    let edge = g.t_edge();
    let mut hi;
    if edge.is_finite() {
        if phi(edge)? <= 0.5 {
            return Ok(g.t_max());
        }
        hi = edge;
    } else {
        hi = 1.0;
        while phi(hi)? <= 0.5 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Ok(f64::INFINITY);
            }
        }
    }
    let mut lo = 0.0;
    let mut phi_lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = phi(mid)?;
        if v <= 0.5 {
            lo = mid;
            phi_lo = v;
        } else {
            hi = mid;
        }
        if phi_lo >= 0.5 - 1e-9 && (hi - lo) <= 1e-15 * hi {
            break;
        }
    }
    if phi_lo < 0.5 - 1e-9 {
        return Err(Error::numeric("find_T: t·g(t) could not be brought within 1e-9 of 1/2", 0.5 - phi_lo));
    }
    Ok(lo)
}

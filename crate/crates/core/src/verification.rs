//! Audits of certificates against empirical tails and exact oracles, and
//! numerical checks of the identities behind the bounds.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::{fmt_float, BoundCertificate, Direction};
use crate::error::{Error, Result};
use crate::rates::thm3_report;
use crate::sampler::{sample_coordinate, sample_norms, TailEstimate};
use crate::stats::{clopper_pearson_lower, clopper_pearson_upper, normal_quantile_two_sided};
use crate::vector::{Coordinate, IdVectorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// Informational outcome of a check that cannot be decided at finite `n`.
    HeuristicPass,
    HeuristicFail,
}

impl Verdict {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Verdict::Fail)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::HeuristicPass => "HEURISTIC-PASS",
            Verdict::HeuristicFail => "HEURISTIC-FAIL",
        }
    }
}

/// Process exit code: 0 when nothing failed, 1 otherwise. Heuristic
/// verdicts never fail a run.
pub fn exit_code(verdicts: &[Verdict]) -> i32 {
    if verdicts.iter().any(Verdict::is_failure) {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    pub x: f64,
    pub bound: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub pass: bool,
    /// `log(bound / p_hat)`; `+∞` when no exceedance was observed.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub family: String,
    pub measure_family: String,
    pub direction: Direction,
    pub norm_p: f64,
    /// Number of samples, or `None` for an exact oracle.
    pub n: Option<u64>,
    pub confidence: f64,
    /// One-sided error probability per grid point after Bonferroni.
    pub alpha_per_point: f64,
    pub centering_value: Option<f64>,
    pub points: Vec<PointCheck>,
    pub verdict: Verdict,
}

impl BoundReport {
    /// CSV with columns `x, bound, p_hat, ci_low, ci_high, pass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,bound,p_hat,ci_low,ci_high,pass\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_float(p.x),
                fmt_float(p.bound),
                fmt_float(p.p_hat),
                fmt_float(p.ci_low),
                fmt_float(p.ci_high),
                if p.pass { "PASS" } else { "FAIL" }
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} [{}] {} tail of ‖X‖_{}: {}",
            self.family,
            self.measure_family,
            self.direction.as_str(),
            self.norm_p,
            self.verdict.as_str()
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "  x = {:<12.6} bound = {:<12.6e} p_hat = {:<12.6e} ci_low = {:<12.6e} {}",
                p.x,
                p.bound,
                p.p_hat,
                p.ci_low,
                if p.pass { "PASS" } else { "FAIL" }
            );
        }
        out
    }
}

fn slack(bound: f64, p_hat: f64) -> f64 {
    if p_hat > 0.0 {
        (bound / p_hat).ln()
    } else {
        f64::INFINITY
    }
}

/// Per grid point, PASS when the one-sided lower confidence limit of the
/// empirical tail is at most the bound. The limit is Clopper–Pearson at
/// `(1 - confidence)/m` for an `m`-point grid, so the whole grid is tested
/// at the stated confidence.
pub fn verify_bound(cert: &BoundCertificate, tail: &TailEstimate, confidence: f64) -> Result<BoundReport> {
    if cert.x_grid.len() != tail.x_grid.len()
        || cert.x_grid.iter().zip(&tail.x_grid).any(|(a, b)| a.to_bits() != b.to_bits())
    {
        return Err(Error::config("certificate and tail estimate use different x grids"));
    }
    if cert.norm_p != tail.norm_p {
        return Err(Error::config(format!(
            "certificate is for p = {} but the tail is for p = {}",
            cert.norm_p, tail.norm_p
        )));
    }
    if cert.direction != tail.direction {
        return Err(Error::config("certificate and tail estimate bound different tails"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::config(format!("confidence {confidence} must lie in (0, 1)")));
    }
    let m = cert.x_grid.len().max(1) as f64;
    let alpha = (1.0 - confidence) / m;
    let points: Vec<PointCheck> = cert
        .x_grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let k = tail.counts[i];
            let ci_low = clopper_pearson_lower(k, tail.n, alpha);
            let ci_high = clopper_pearson_upper(k, tail.n, alpha);
            let bound = cert.bound[i];
            PointCheck {
                x,
                bound,
                p_hat: tail.p_hat[i],
                ci_low,
                ci_high,
                pass: ci_low <= bound,
                slack: slack(bound, tail.p_hat[i]),
            }
        })
        .collect();
    let verdict = Verdict::from_pass(points.iter().all(|p| p.pass));
    Ok(BoundReport {
        family: cert.family.clone(),
        measure_family: cert.measure_family.clone(),
        direction: cert.direction,
        norm_p: cert.norm_p,
        n: Some(tail.n),
        confidence,
        alpha_per_point: alpha,
        centering_value: Some(tail.centering_value),
        points,
        verdict,
    })
}

/// PASS at `x` when the exact tail probability is at most the bound.
pub fn verify_against_exact(cert: &BoundCertificate, exact: &[f64]) -> Result<BoundReport> {
    if exact.len() != cert.x_grid.len() {
        return Err(Error::config("exact tail and certificate grid lengths differ"));
    }
    let points: Vec<PointCheck> = cert
        .x_grid
        .iter()
        .zip(&cert.bound)
        .zip(exact)
        .map(|((&x, &bound), &e)| PointCheck {
            x,
            bound,
            p_hat: e,
            ci_low: e,
            ci_high: e,
            pass: e <= bound,
            slack: slack(bound, e),
        })
        .collect();
    let verdict = Verdict::from_pass(points.iter().all(|p| p.pass));
    Ok(BoundReport {
        family: cert.family.clone(),
        measure_family: cert.measure_family.clone(),
        direction: cert.direction,
        norm_p: cert.norm_p,
        n: None,
        confidence: 1.0,
        alpha_per_point: 0.0,
        centering_value: None,
        points,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub expected: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub verdict: Verdict,
}

impl IdentityReport {
    pub fn to_text(&self) -> String {
        format!(
            "{}: expected {:.6e}, estimate {:.6e} in [{:.6e}, {:.6e}] (n = {}): {}\n",
            self.name,
            self.expected,
            self.estimate,
            self.ci_low,
            self.ci_high,
            self.n,
            self.verdict.as_str()
        )
    }
}

/// `Var X_1 = ∫u²ν̃(du)`: PASS when the CLT interval of the sample variance
/// covers the integral.
pub fn verify_variance_identity(c: &Coordinate, n: usize, seed: u64, level: f64) -> Result<IdentityReport> {
    if n < 2 {
        return Err(Error::config("variance check needs n >= 2"));
    }
    let expected = c.measure.poly_moment(2.0)?;
    let xs = sample_coordinate(c, 1.0, n, seed)?.values;
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = (x - mean) * (x - mean);
        (a + d, b + d * d)
    });
    let var = m2 / (nf - 1.0);
    let mu4 = m4 / nf;
    let se = ((mu4 - var * var).max(0.0) / nf).sqrt();
    let z = normal_quantile_two_sided(level);
    let (lo, hi) = (var - z * se, var + z * se);
    Ok(IdentityReport {
        name: format!("variance identity [{}]", c.measure.family_name()),
        expected,
        estimate: var,
        ci_low: lo,
        ci_high: hi,
        n: n as u64,
        verdict: Verdict::from_pass(lo <= expected && expected <= hi),
    })
}

/// `RHS - LHS` of
/// `E[X e^{λY}] <= E[Y e^{λY}] + (log E e^{λX}/λ) E e^{λY} - (log E e^{λY}/λ) E e^{λY}`
/// for a finite joint law given as `(x, y, prob)` triples.
pub fn young_gap(points: &[(f64, f64, f64)], lambda: f64) -> f64 {
    let mut lhs = 0.0;
    let mut y_term = 0.0;
    let mut ex = 0.0;
    let mut ey = 0.0;
    for &(x, y, p) in points {
        let w = (lambda * y).exp();
        lhs += p * x * w;
        y_term += p * y * w;
        ex += p * (lambda * x).exp();
        ey += p * w;
    }
    let rhs = y_term + ex.ln() / lambda * ey - ey.ln() / lambda * ey;
    rhs - lhs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungReport {
    pub trials: usize,
    pub violations: usize,
    /// Smallest `RHS - LHS` seen.
    pub min_gap: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl YoungReport {
    pub fn to_text(&self) -> String {
        format!(
            "exponential Young inequality: {} violations in {} trials (min gap {:.3e}): {}\n",
            self.violations,
            self.trials,
            self.min_gap,
            self.verdict.as_str()
        )
    }
}

/// Random finite-support pairs `(X, Y)` with values in `[-2, 2]`, up to 8
/// support points and `λ ∈ (0, 2]`, each evaluated exactly.
pub fn verify_young(n_trials: usize, seed: u64) -> YoungReport {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..n_trials {
        let k = rng.random_range(1..=8);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let points: Vec<(f64, f64, f64)> = raw
            .iter()
            .map(|w| (rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=2.0), w / total))
            .collect();
        let lambda = 2.0 - rng.random_range(0.0..2.0);
        let gap = young_gap(&points, lambda);
        min_gap = min_gap.min(gap);
        if gap < -TOL {
            violations += 1;
        }
    }
    YoungReport {
        trials: n_trials,
        violations,
        min_gap,
        tolerance: TOL,
        verdict: Verdict::from_pass(violations == 0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub lambda: f64,
    pub lambda_max: f64,
    pub r: f64,
    /// `(n, running mean)` at each stage.
    pub stages: Vec<(u64, f64)>,
    pub max_ratio: f64,
    pub factor: f64,
    pub verdict: Verdict,
}

impl IntegrabilityReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "integrability audit at λ = {:.4e} (λ_max = {:.4e}): {} (heuristic, not a proof)\n",
            self.lambda,
            self.lambda_max,
            self.verdict.as_str()
        );
        for (n, m) in &self.stages {
            let _ = writeln!(out, "  n = {n:<10} mean = {m:.6e}");
        }
        out
    }
}

/// `exp((v/R)·log⁺(λ v/R))`.
pub fn integrability_integrand(v: f64, r: f64, lambda: f64) -> f64 {
    let a = v / r;
    (a * (lambda * a).ln().max(0.0)).exp()
}

/// Running sample means of `exp((‖X‖_2/R)·log⁺(λ‖X‖_2/R))` at the stages
/// of `schedule`; HEURISTIC-PASS when consecutive stages differ by at most
/// `factor`. Rejects `λ >= λ_max`.
pub fn verify_thm3_integrability(
    spec: &IdVectorSpec,
    lambda: f64,
    schedule: &[usize],
    seed: u64,
    factor: f64,
) -> Result<IntegrabilityReport> {
    let c = spec.iid_coordinate()?;
    let report = thm3_report(&c.measure)?;
    if !(lambda > 0.0) || lambda >= report.lambda_max {
        return Err(Error::domain(format!(
            "λ = {lambda} is outside (0, λ_max = {}) where integrability is guaranteed",
            report.lambda_max
        )));
    }
    let mut schedule = schedule.to_vec();
    schedule.sort_unstable();
    let n_max = *schedule.last().ok_or_else(|| Error::config("empty stage schedule"))?;
    let norms = sample_norms(spec, 2.0, n_max, seed)?;
    let mut stages = Vec::new();
    let mut sum = 0.0;
    let mut next = 0;
    for (i, v) in norms.iter().enumerate() {
        sum += integrability_integrand(*v, report.r, lambda);
        if next < schedule.len() && i + 1 == schedule[next] {
            stages.push(((i + 1) as u64, sum / (i + 1) as f64));
            next += 1;
        }
    }
    let max_ratio = stages
        .windows(2)
        .map(|w| (w[1].1 / w[0].1).max(w[0].1 / w[1].1))
        .fold(1.0, f64::max);
    Ok(IntegrabilityReport {
        lambda,
        lambda_max: report.lambda_max,
        r: report.r,
        stages,
        max_ratio,
        factor,
        verdict: if max_ratio <= factor {
            Verdict::HeuristicPass
        } else {
            Verdict::HeuristicFail
        },
    })
}

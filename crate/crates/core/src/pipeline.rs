//! End-to-end runs: resolve moment inputs, build a certificate for a bound
//! family, and audit it against a Monte Carlo tail.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::certificate::{BoundCertificate, CenterStat, Centering, Direction};
use crate::error::{Error, Result};
use crate::levy::LevyMeasure1D;
use crate::numerics::{InputRecord, NumericConfig};
use crate::rates::{self, Moment, MomentSet, ProjectionSpec, ProjectionVariant};
use crate::sampler::{self, Side, TailCentering, TailEstimate, DEFAULT_CONFIDENCE, DEFAULT_Z_POINTS};
use crate::vector::IdVectorSpec;
use crate::verification::{verify_bound, BoundReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Offset between the tail-sampling seed and the moment-estimation seed, so
/// the two sample sets are independent.
const MOMENT_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    Thm1,
    Thm2,
    Thm5Positive,
    Thm5General,
    Thm4,
    Cor2,
    Cor3,
    Cor4,
    Cor5,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 9] = [
        BoundFamily::Thm1,
        BoundFamily::Thm2,
        BoundFamily::Thm5Positive,
        BoundFamily::Thm5General,
        BoundFamily::Thm4,
        BoundFamily::Cor2,
        BoundFamily::Cor3,
        BoundFamily::Cor4,
        BoundFamily::Cor5,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundFamily::Thm1 => "thm1",
            BoundFamily::Thm2 => "thm2",
            BoundFamily::Thm5Positive => "thm5_positive",
            BoundFamily::Thm5General => "thm5_general",
            BoundFamily::Thm4 => "thm4",
            BoundFamily::Cor2 => "cor2",
            BoundFamily::Cor3 => "cor3",
            BoundFamily::Cor4 => "cor4",
            BoundFamily::Cor5 => "cor5",
        }
    }
}

impl fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = BoundFamily::ALL.iter().map(|f| f.as_str()).collect();
                Error::config(format!("unknown family '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRequest {
    pub family: BoundFamily,
    pub p: f64,
    pub eps: f64,
    pub direction: Direction,
    pub x_grid: Vec<f64>,
    pub projection: Option<ProjectionSpec>,
    #[serde(default)]
    pub numeric: NumericConfig,
}

impl BoundRequest {
    pub fn new(family: BoundFamily, x_grid: Vec<f64>) -> Self {
        BoundRequest {
            family,
            p: 2.0,
            eps: 1.0,
            direction: Direction::Upper,
            x_grid,
            projection: None,
            numeric: NumericConfig::default(),
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_projection(mut self, projection: ProjectionSpec) -> Self {
        self.projection = Some(projection);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub n: usize,
    pub seed: u64,
    pub confidence: f64,
    pub z_points: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n: 100_000,
            seed: 0,
            confidence: DEFAULT_CONFIDENCE,
            z_points: DEFAULT_Z_POINTS,
        }
    }
}

impl MonteCarloConfig {
    fn moment_seed(&self) -> u64 {
        self.seed.wrapping_add(MOMENT_SEED_OFFSET)
    }
}

fn need_p_at_least(req: &BoundRequest, min: f64) -> Result<()> {
    if !(req.p >= min) {
        return Err(Error::config(format!("{} needs p >= {min}, got p = {}", req.family, req.p)));
    }
    Ok(())
}

fn upper_only(req: &BoundRequest) -> Result<()> {
    if req.direction == Direction::Lower {
        return Err(Error::Unsupported(format!("{} has no lower-deviation form", req.family)));
    }
    Ok(())
}

fn projection<'a>(spec: &IdVectorSpec, req: &'a BoundRequest) -> Result<&'a ProjectionSpec> {
    let proj = req
        .projection
        .as_ref()
        .ok_or_else(|| Error::config(format!("{} needs a projection", req.family)))?;
    if proj.dim() != spec.dim() {
        return Err(Error::config(format!(
            "projection has {} columns but d = {}",
            proj.dim(),
            spec.dim()
        )));
    }
    Ok(proj)
}

/// The modified-moment family that fits the marginal: the positive-case
/// rate for nonnegative coordinates, the general rate otherwise.
pub fn route_thm5(spec: &IdVectorSpec) -> Result<BoundFamily> {
    Ok(if spec.iid_coordinate()?.is_nonnegative() {
        BoundFamily::Thm5Positive
    } else {
        BoundFamily::Thm5General
    })
}

/// Check the hypotheses of `req.family` against the vector law.
pub fn check_applicable(spec: &IdVectorSpec, req: &BoundRequest) -> Result<()> {
    if req.x_grid.is_empty() {
        return Err(Error::config("x grid is empty"));
    }
    if !(req.eps > 0.0 && req.eps.is_finite()) {
        return Err(Error::config(format!("eps = {} must be positive", req.eps)));
    }
    match req.family {
        BoundFamily::Thm1 => {
            spec.iid_coordinate()?;
            upper_only(req)?;
            if req.p != 2.0 {
                return Err(Error::config("thm1 bounds the Euclidean norm; use p = 2"));
            }
        }
        BoundFamily::Thm2 => {
            let c = spec.iid_coordinate()?;
            need_p_at_least(req, 2.0)?;
            upper_only(req)?;
            if !(c.is_symmetric() || c.is_nonnegative()) {
                return Err(Error::Unsupported(
                    "thm2 needs a symmetric or nonnegative marginal (drift included); use thm5_general".into(),
                ));
            }
        }
        BoundFamily::Thm5Positive => {
            let c = spec.iid_coordinate()?;
            need_p_at_least(req, 2.0)?;
            upper_only(req)?;
            if !c.is_nonnegative() {
                return Err(Error::Unsupported("thm5_positive needs nonnegative coordinates".into()));
            }
        }
        BoundFamily::Thm5General => {
            spec.iid_coordinate()?;
            need_p_at_least(req, 1.0)?;
            upper_only(req)?;
        }
        BoundFamily::Thm4 | BoundFamily::Cor2 => {
            if req.family == BoundFamily::Thm4 {
                spec.iid_coordinate()?;
            }
            upper_only(req)?;
            if req.p != 2.0 {
                return Err(Error::config(format!("{} bounds the Euclidean norm; use p = 2", req.family)));
            }
            if req.family == BoundFamily::Cor2 && !spec.support_radius().is_finite() {
                return Err(Error::domain("cor2 needs bounded jumps (finite R)"));
            }
        }
        BoundFamily::Cor3 => {
            projection(spec, req)?;
        }
        BoundFamily::Cor4 => {
            let c = spec.iid_coordinate()?;
            projection(spec, req)?;
            upper_only(req).map_err(|_| {
                Error::Unsupported("cor4 lower deviation is not provided; use cor3 with E = ε".into())
            })?;
            if c.mean()?.abs() > 1e-12 {
                return Err(Error::config("cor4 needs centered coordinates"));
            }
        }
        BoundFamily::Cor5 => {
            spec.iid_coordinate()?;
            need_p_at_least(req, 2.0)?;
            if req.direction == Direction::Lower && req.eps >= 1.0 {
                return Err(Error::config("cor5 lower deviation needs eps < 1"));
            }
        }
    }
    Ok(())
}

/// Resolve the moment inputs `req.family` consumes: analytic where a
/// closed form exists, otherwise Monte Carlo with the conservative end of
/// the interval.
pub fn resolve_moments(spec: &IdVectorSpec, req: &BoundRequest, mc: &MonteCarloConfig) -> Result<MomentSet> {
    check_applicable(spec, req)?;
    let mut m = MomentSet::new(req.p);
    let seed = mc.moment_seed();
    let level = mc.confidence;
    match req.family {
        BoundFamily::Thm1 => {
            let c = spec.iid_coordinate()?;
            m.l = Some(sampler::estimate_l(c, mc.n, seed, level)?.as_moment());
        }
        BoundFamily::Thm2 | BoundFamily::Thm5Positive => {
            let c = spec.iid_coordinate()?;
            m.m_p = Some(sampler::abs_moment_input(c, req.p, mc.n, seed, level, Side::Lower)?);
            m.m_2p = Some(sampler::abs_moment_input(c, 2.0 * req.p, mc.n, seed, level, Side::Upper)?);
        }
        BoundFamily::Thm5General => {
            let c = spec.iid_coordinate()?;
            let mm = sampler::estimate_modified_moments(c, req.p, &sampler::z_grid(mc.z_points), mc.n, seed, level)?;
            m.mod_m_p_lower = Some(mm.lower_moment());
            m.mod_m_2p_upper = Some(mm.upper_moment());
        }
        BoundFamily::Thm4 | BoundFamily::Cor2 => {
            m.e_norm_p = Some(sampler::norm_expectation_input(spec, 2.0, mc.n, seed, level)?);
        }
        BoundFamily::Cor5 => {
            m.e_norm_p = Some(sampler::norm_expectation_input(spec, req.p, mc.n, seed, level)?);
        }
        BoundFamily::Cor4 => {
            m.e_x1_sq = Some(sampler::second_moment_input(spec.iid_coordinate()?)?);
        }
        BoundFamily::Cor3 => {}
    }
    m.validate()?;
    Ok(m)
}

fn input(m: &Option<Moment>, name: &str) -> Result<Moment> {
    m.clone()
        .ok_or_else(|| Error::config(format!("moment input {name} is required for this bound")))
}

fn record(m: &Moment, name: &str) -> InputRecord {
    InputRecord {
        quantity: name.to_string(),
        value: m.value,
        source: m.source.clone(),
    }
}

fn measures(spec: &IdVectorSpec) -> Vec<LevyMeasure1D> {
    spec.distinct().iter().map(|c| c.measure.clone()).collect()
}

/// Certificate for `req.family` from resolved moments.
pub fn certify(spec: &IdVectorSpec, req: &BoundRequest, moments: &MomentSet) -> Result<BoundCertificate> {
    check_applicable(spec, req)?;
    let family = req.family.as_str();
    let measure_family = spec.coordinate(0).measure.family_name();
    let p = req.p;
    let eps = req.eps;
    let x = &req.x_grid;
    let cfg = &req.numeric;
    let mut cert = match req.family {
        BoundFamily::Thm1 => rates::bound_thm1(spec, moments, x)?,
        BoundFamily::Thm2 | BoundFamily::Thm5Positive => {
            let c = spec.iid_coordinate()?;
            let (mp, m2p) = (input(&moments.m_p, "m_p")?, input(&moments.m_2p, "m_2p")?);
            let h = if req.family == BoundFamily::Thm2 {
                rates::rate_thm2(c, p, mp.value, m2p.value)?
            } else {
                rates::rate_thm5_positive(c, p, mp.value, m2p.value)?
            };
            let h = h.with_input(record(&mp, "m_p")).with_input(record(&m2p, "m_2p"));
            rates::certify_rate_with(family, measure_family, &h, p, Centering::mean(p), Direction::Upper, x, cfg)?
        }
        BoundFamily::Thm5General => {
            let c = spec.iid_coordinate()?;
            let lo = input(&moments.mod_m_p_lower, "modified m_p")?;
            let hi = input(&moments.mod_m_2p_upper, "modified m_2p")?;
            let h = rates::rate_thm5_general(&c.measure, p, lo.value, hi.value, Some(spec.dim()))?
                .with_input(record(&lo, "modified m_p lower"))
                .with_input(record(&hi, "modified m_2p upper"));
            let mut cert = rates::certify_rate_with(family, measure_family, &h, p, Centering::mean(p), Direction::Upper, x, cfg)?;
            cert.dimension_dependent = p < 2.0;
            cert
        }
        BoundFamily::Thm4 => {
            let c = spec.iid_coordinate()?;
            let e = input(&moments.e_norm_p, "E‖X‖_2")?;
            let h = rates::rate_thm4(&c.measure, spec.dim(), eps, e.value)?.with_input(record(&e, "E‖X‖_2"));
            let centering = Centering::scaled_mean(2.0, 1.0 + eps).with_value(e.value, e.source.clone());
            rates::certify_rate_with(family, measure_family, &h, 2.0, centering, Direction::Upper, x, cfg)?
        }
        BoundFamily::Cor2 => rates::certify_cor2(spec, eps, moments, x)?,
        BoundFamily::Cor3 => {
            let proj = projection(spec, req)?;
            let h = rates::rate_projection(&measures(spec), proj, ProjectionVariant::Cor3)?;
            let offset = match req.direction {
                Direction::Upper => proj.offset,
                Direction::Lower => -proj.offset,
            };
            let centering = Centering {
                description: format!("E‖Π_S X‖_2 {} {}", if offset >= 0.0 { "+" } else { "-" }, proj.offset),
                offset,
                ..Centering::mean(2.0)
            };
            rates::certify_rate_with(family, measure_family, &h, 2.0, centering, req.direction, x, cfg)?
        }
        BoundFamily::Cor4 => {
            let proj = projection(spec, req)?;
            let e2 = input(&moments.e_x1_sq, "E X_1²")?;
            let h = rates::rate_projection(&measures(spec), proj, ProjectionVariant::Cor4 { e_x1_sq: e2.value })?
                .with_input(record(&e2, "E X_1²"));
            let centering = Centering {
                description: format!("{}·sqrt(E‖Π_S X‖_2²)", 1.0 + proj.offset),
                stat: CenterStat::RootMeanSquare,
                factor: 1.0 + proj.offset,
                ..Centering::mean(2.0)
            };
            rates::certify_rate_with(family, measure_family, &h, 2.0, centering, Direction::Upper, x, cfg)?
        }
        BoundFamily::Cor5 => {
            let c = spec.iid_coordinate()?;
            let e = input(&moments.e_norm_p, "E‖X‖_p")?;
            let h = rates::rate_cor5(&c.measure, p, spec.dim(), eps, e.value)?.with_input(record(&e, "E‖X‖_p"));
            let factor = match req.direction {
                Direction::Upper => 1.0 + eps,
                Direction::Lower => 1.0 - eps,
            };
            let centering = Centering::scaled_mean(p, factor).with_value(e.value, e.source.clone());
            rates::certify_rate_with(family, measure_family, &h, p, centering, req.direction, x, cfg)?
        }
    };
    if measure_family == "custom_density" {
        let c = &spec.coordinate(0).measure;
        cert.notes.push(format!(
            "declared M = {}, R = {}",
            c.exp_moment_abscissa(),
            c.support_radius()
        ));
    }
    Ok(cert)
}

/// Resolve moments and certify.
pub fn bound(spec: &IdVectorSpec, req: &BoundRequest, mc: &MonteCarloConfig) -> Result<BoundCertificate> {
    let moments = resolve_moments(spec, req, mc)?;
    certify(spec, req, &moments)
}

/// Law of the projected vector when the projection keeps whole
/// coordinates (every `π_k` is 0 or 1).
fn coordinate_subvector(spec: &IdVectorSpec, proj: &ProjectionSpec) -> Result<IdVectorSpec> {
    if proj.col_norms.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::Unsupported(
            "Monte Carlo audit of a projection bound needs a coordinate projection (π_k ∈ {0, 1})".into(),
        ));
    }
    let kept: Vec<_> = (0..spec.dim())
        .filter(|k| proj.col_norms[*k] == 1.0)
        .map(|k| spec.coordinate(k).clone())
        .collect();
    if kept.is_empty() {
        return Err(Error::config("projection onto {0} has nothing to audit"));
    }
    match spec.coordinates() {
        crate::vector::Coordinates::Iid(c) => IdVectorSpec::iid(kept.len(), c.clone()),
        crate::vector::Coordinates::Independent(_) => IdVectorSpec::independent(kept),
    }
}

/// Certificate, empirical tail and audit report of one verify run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub certificate: BoundCertificate,
    pub tail: TailEstimate,
    pub report: BoundReport,
}

/// Build the certificate, sample `n` vectors with `mc.seed`, and audit.
pub fn verify(spec: &IdVectorSpec, req: &BoundRequest, mc: &MonteCarloConfig) -> Result<VerifyOutcome> {
    if mc.n < 100 {
        return Err(Error::config(format!("n = {} is too small for verification (need >= 100)", mc.n)));
    }
    let certificate = bound(spec, req, mc)?;
    let audited = match req.family {
        BoundFamily::Cor3 | BoundFamily::Cor4 => coordinate_subvector(spec, projection(spec, req)?)?,
        _ => spec.clone(),
    };
    let tail = sampler::empirical_tail(
        &audited,
        certificate.norm_p,
        &req.x_grid,
        mc.n,
        mc.seed,
        TailCentering::from(&certificate.centering),
        certificate.direction,
        mc.confidence,
    )?;
    let report = verify_bound(&certificate, &tail, mc.confidence)?;
    Ok(VerifyOutcome {
        certificate,
        tail,
        report,
    })
}

/// `count` points from `min` to `max`, evenly spaced or log-spaced.
pub fn make_grid(min: f64, max: f64, count: usize, log: bool) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::config("grid count must be at least 2"));
    }
    if !(min.is_finite() && max.is_finite() && min < max && min >= 0.0) {
        return Err(Error::config(format!("grid range {min}:{max} must satisfy 0 <= min < max")));
    }
    if log && min <= 0.0 {
        return Err(Error::config("log grid needs min > 0"));
    }
    let k = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            let f = i as f64 / k;
            if i == count - 1 {
                max
            } else if log {
                (min.ln() + f * (max.ln() - min.ln())).exp()
            } else {
                min + f * (max - min)
            }
        })
        .collect())
}

//! Reproducible sampling of ID vectors and Lévy-process marginals, and the
//! moment estimators the rate functions consume.
//!
//! Samples are generated in fixed chunks of [`CHUNK`] rows. Chunk `c` of a
//! stream family `domain` draws from ChaCha8 seeded with the master seed
//! and stream number `(domain << 32) | c`, so results do not depend on how
//! chunks are scheduled across threads.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{fmt_float, CenterStat, Centering, Direction};
use crate::error::{Error, Result};
use crate::levy::{CustomDensity, JumpLaw, LevyMeasure1D};
use crate::marginal;
use crate::numerics::Provenance;
use crate::quadrature::{self, Tolerance};
use crate::rates::Moment;
use crate::stats::{clopper_pearson, MeanEstimate, Moments};
use crate::vector::{Coordinate, IdVectorSpec};

pub const CHUNK: usize = 4096;
pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const DEFAULT_Z_POINTS: usize = 21;

/// Discarded small-jump variance allowed, relative to `∫u²ν̃`.
pub const SMALL_JUMP_VARIANCE: f64 = 1e-6;

const DOMAIN_MARGINAL: u64 = 1;
const DOMAIN_VECTOR: u64 = 2;
const DOMAIN_MODIFIED: u64 = 3;

fn chunk_rng(seed: u64, domain: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 32) | chunk as u64);
    rng
}

/// Run `f(rng, rows)` on every chunk in parallel and return the results in
/// chunk order.
fn chunked<T, F>(n: usize, seed: u64, domain: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let rows = CHUNK.min(n - c * CHUNK);
            f(&mut chunk_rng(seed, domain, c), rows)
        })
        .collect()
}

/// Compound-Poisson approximation of a custom density: jumps with
/// `|u| > delta` are simulated from the normalized restriction, smaller
/// jumps are replaced by their mean.
#[derive(Debug, Clone)]
pub struct CompoundApprox {
    pub delta: f64,
    /// `∫_{|u|>δ} k(u) du`
    pub jump_rate: f64,
    /// `∫_{|u|≤δ} u k(u) du`
    pub small_jump_mean: f64,
    /// `∫_{|u|≤δ} u² k(u) du`
    pub discarded_variance: f64,
    /// Variance per unit time of the simulated jumps.
    pub kept_variance: f64,
    cells: Vec<Cell>,
    cell_index: Option<WeightedIndex<f64>>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    a: f64,
    b: f64,
    ka: f64,
    kb: f64,
}

impl Cell {
    /// Draw from the density on `[a, b]` interpolated linearly between the
    /// endpoint values (exact for piecewise-linear tables).
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let w: f64 = rng.random();
        let (ka, kb, h) = (self.ka.max(0.0), self.kb.max(0.0), self.b - self.a);
        let slope = kb - ka;
        if slope.abs() <= 1e-12 * (ka + kb) || ka + kb == 0.0 {
            return self.a + w * h;
        }
        // solve ka·s + slope·s²/(2h) = w·(ka + kb)·h/2 for s in [0, h]
        let target = w * (ka + kb) * h / 2.0;
        let disc = ka * ka + 2.0 * slope * target / h;
        let s = 2.0 * target / (ka + disc.max(0.0).sqrt());
        self.a + s.clamp(0.0, h)
    }
}

const CELLS_PER_SIDE: usize = 2048;

impl CompoundApprox {
    pub fn new(c: &CustomDensity) -> Result<Self> {
        let tol = Tolerance::new(1e-300, 1e-10);
        let (lo, hi) = c.support();
        let moment = |q: i32, from: f64, to: f64| -> Result<f64> {
            // ∫ over from <= |u| <= to, within the support
            let mut total = 0.0;
            if hi > from && to > from {
                total += quadrature::integrate_pieces(
                    |u| u.powi(q) * c.density(u),
                    &clip_breaks(c, from, to.min(hi)),
                    tol,
                )?
                .value;
            }
            if lo < -from && to > from {
                total += quadrature::integrate_pieces(
                    |u| u.powi(q) * c.density(u),
                    &clip_breaks(c, (-to).max(lo), -from),
                    tol,
                )?
                .value;
            }
            Ok(total)
        };
        let reach = lo.abs().max(hi.abs());
        let total_var = moment(2, 0.0, reach)?;
        if !(total_var > 0.0) {
            return Err(Error::config("custom density has no mass"));
        }
        // 1% headroom so the certified budget survives quadrature error
        let budget = 0.99 * SMALL_JUMP_VARIANCE * total_var;
        // largest δ with discarded variance below the budget, by bisection
        let (mut a, mut b) = (0.0, reach);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if moment(2, 0.0, mid)? < budget {
                a = mid;
            } else {
                b = mid;
            }
        }
        let delta = a;
        let discarded_variance = moment(2, 0.0, delta)?;
        let small_jump_mean = moment(1, 0.0, delta)?;

        let mut cells = Vec::new();
        let sides: [(f64, f64, bool); 2] = [(delta.max(lo.max(0.0)), hi, true), (delta.max((-hi).max(0.0)), -lo, false)];
        for (from, to, positive) in sides {
            if to <= from {
                continue;
            }
            let grid = cell_grid(c, from, to, positive);
            for w in grid.windows(2) {
                let (a, b) = if positive { (w[0], w[1]) } else { (-w[1], -w[0]) };
                cells.push(Cell {
                    a,
                    b,
                    ka: c.density(a),
                    kb: c.density(b),
                });
            }
        }
        let masses: Vec<f64> = cells.iter().map(|c| 0.5 * (c.ka.max(0.0) + c.kb.max(0.0)) * (c.b - c.a)).collect();
        let jump_rate: f64 = masses.iter().sum();
        let kept_variance: f64 = cells
            .iter()
            .map(|c| {
                // Simpson's rule is exact for u² times the linear interpolant
                let mid = 0.5 * (c.a + c.b);
                let k_mid = 0.5 * (c.ka.max(0.0) + c.kb.max(0.0));
                (c.b - c.a) / 6.0 * (c.a * c.a * c.ka.max(0.0) + 4.0 * mid * mid * k_mid + c.b * c.b * c.kb.max(0.0))
            })
            .sum();
        let cell_index = if jump_rate > 0.0 {
            Some(WeightedIndex::new(&masses).map_err(|e| Error::config(format!("jump table: {e}")))?)
        } else {
            None
        };
        Ok(CompoundApprox {
            delta,
            jump_rate,
            small_jump_mean,
            discarded_variance,
            kept_variance,
            cells,
            cell_index,
        })
    }

    fn draw_jump<R: Rng>(&self, rng: &mut R) -> f64 {
        let idx = self.cell_index.as_ref().expect("nonempty jump table");
        self.cells[idx.sample(rng)].draw(rng)
    }
}

fn clip_breaks(c: &CustomDensity, from: f64, to: f64) -> Vec<f64> {
    let mut b: Vec<f64> = c.breaks().into_iter().filter(|u| *u > from && *u < to).collect();
    b.insert(0, from);
    b.push(to);
    b
}

/// Cell boundaries on `[from, to]` (one side, as magnitudes): geometric
/// near the origin, plus every table node.
fn cell_grid(c: &CustomDensity, from: f64, to: f64, positive: bool) -> Vec<f64> {
    let mut g: Vec<f64> = if from > 0.0 && to / from > 4.0 {
        let ratio = (to / from).ln() / CELLS_PER_SIDE as f64;
        (0..=CELLS_PER_SIDE).map(|i| from * (ratio * i as f64).exp()).collect()
    } else {
        (0..=CELLS_PER_SIDE)
            .map(|i| from + (to - from) * i as f64 / CELLS_PER_SIDE as f64)
            .collect()
    };
    for u in c.breaks() {
        let m = if positive { u } else { -u };
        if m > from && m < to {
            g.push(m);
        }
    }
    g[0] = from;
    *g.last_mut().expect("grid") = to;
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

#[derive(Debug, Clone)]
enum Law {
    Zero,
    GammaDiff(Gamma<f64>),
    Gamma(Gamma<f64>),
    Atom { jump: f64, count: Poisson<f64> },
    Uniform { count: Poisson<f64>, lo: f64, hi: f64 },
    Discrete { count: Poisson<f64>, values: Vec<f64>, index: WeightedIndex<f64> },
    Custom { count: Option<Poisson<f64>>, approx: Box<CompoundApprox>, z: f64 },
}

/// Sampler for the time-`z` marginal `X_z` of one coordinate, drift
/// included (`z·γ`).
#[derive(Debug, Clone)]
pub struct MarginalSampler {
    law: Law,
    shift: f64,
}

fn poisson(mean: f64) -> Result<Poisson<f64>> {
    Poisson::new(mean).map_err(|e| Error::config(format!("Poisson({mean}): {e}")))
}

impl MarginalSampler {
    pub fn new(c: &Coordinate, z: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::domain(format!("time z = {z} must lie in [0, 1]")));
        }
        let shift = z * c.drift;
        if z == 0.0 {
            return Ok(MarginalSampler { law: Law::Zero, shift });
        }
        let law = match &c.measure {
            LevyMeasure1D::SymmetricExponential { scale } => Law::GammaDiff(
                Gamma::new(z, *scale).map_err(|e| Error::config(format!("gamma law: {e}")))?,
            ),
            LevyMeasure1D::GammaLevy { rate, shape } => Law::Gamma(
                Gamma::new(z * shape, 1.0 / rate).map_err(|e| Error::config(format!("gamma law: {e}")))?,
            ),
            LevyMeasure1D::PoissonAtom { intensity, jump } => Law::Atom {
                jump: *jump,
                count: poisson(z * intensity)?,
            },
            LevyMeasure1D::CompoundPoisson { rate, jumps } => match jumps {
                JumpLaw::Uniform { lo, hi } => Law::Uniform {
                    count: poisson(z * rate)?,
                    lo: *lo,
                    hi: *hi,
                },
                JumpLaw::Discrete { values, probs } => Law::Discrete {
                    count: poisson(z * rate)?,
                    values: values.clone(),
                    index: WeightedIndex::new(probs).map_err(|e| Error::config(format!("jump law: {e}")))?,
                },
            },
            LevyMeasure1D::CustomDensity(cd) => {
                let approx = CompoundApprox::new(cd)?;
                let count = if approx.jump_rate > 0.0 {
                    Some(poisson(z * approx.jump_rate)?)
                } else {
                    None
                };
                Law::Custom {
                    count,
                    approx: Box::new(approx),
                    z,
                }
            }
        };
        Ok(MarginalSampler { law, shift })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let jumps = match &self.law {
            Law::Zero => 0.0,
            Law::GammaDiff(g) => g.sample(rng) - g.sample(rng),
            Law::Gamma(g) => g.sample(rng),
            Law::Atom { jump, count } => jump * count.sample(rng),
            Law::Uniform { count, lo, hi } => {
                let k = count.sample(rng) as u64;
                (0..k).map(|_| rng.random_range(*lo..=*hi)).sum()
            }
            Law::Discrete { count, values, index } => {
                let k = count.sample(rng) as u64;
                (0..k).map(|_| values[index.sample(rng)]).sum()
            }
            Law::Custom { count, approx, z } => {
                let k = count.as_ref().map_or(0, |c| c.sample(rng) as u64);
                z * approx.small_jump_mean + (0..k).map(|_| approx.draw_jump(rng)).sum::<f64>()
            }
        };
        self.shift + jumps
    }
}

/// `n` draws, row-major with `d` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub z: f64,
}

impl SampleBatch {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.values[i * self.d + k])
    }

    /// CSV with columns `x1, ..., xd`.
    pub fn to_csv(&self) -> String {
        let header: Vec<String> = (1..=self.d).map(|k| format!("x{k}")).collect();
        let mut out = header.join(",");
        out.push('\n');
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|v| fmt_float(*v)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `n` i.i.d. draws of the time-`z` marginal of `m` (zero drift).
pub fn sample_marginal(m: &LevyMeasure1D, z: f64, n: usize, seed: u64) -> Result<SampleBatch> {
    sample_coordinate(&Coordinate::new(m.clone()), z, n, seed)
}

/// `n` i.i.d. draws of `X_z` for one coordinate, drift included.
pub fn sample_coordinate(c: &Coordinate, z: f64, n: usize, seed: u64) -> Result<SampleBatch> {
    let s = MarginalSampler::new(c, z)?;
    let values: Vec<f64> = chunked(n, seed, DOMAIN_MARGINAL, |rng, rows| {
        (0..rows).map(|_| s.sample(rng)).collect::<Vec<f64>>()
    })
    .concat();
    Ok(SampleBatch {
        values,
        n,
        d: 1,
        seed,
        z,
    })
}

fn samplers(spec: &IdVectorSpec) -> Result<Vec<MarginalSampler>> {
    let distinct: Vec<MarginalSampler> = spec
        .distinct()
        .iter()
        .map(|c| MarginalSampler::new(c, 1.0))
        .collect::<Result<_>>()?;
    if distinct.len() == 1 {
        Ok(vec![distinct[0].clone(); spec.dim()])
    } else {
        Ok(distinct)
    }
}

/// Run `f` on each row of `n` draws of `X`, returning per-row outputs in
/// order. Rows are generated exactly as in [`sample_vector`].
fn map_rows<T, F>(spec: &IdVectorSpec, n: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    let ss = samplers(spec)?;
    let d = spec.dim();
    Ok(chunked(n, seed, DOMAIN_VECTOR, |rng, rows| {
        let mut row = vec![0.0; d];
        (0..rows)
            .map(|_| {
                for (x, s) in row.iter_mut().zip(&ss) {
                    *x = s.sample(rng);
                }
                f(&row)
            })
            .collect::<Vec<T>>()
    })
    .into_iter()
    .flatten()
    .collect())
}

/// `n` draws of `X = (X_1, ..., X_d)` with independent coordinates.
pub fn sample_vector(spec: &IdVectorSpec, n: usize, seed: u64) -> Result<SampleBatch> {
    let values = map_rows(spec, n, seed, |row| row.to_vec())?.concat();
    Ok(SampleBatch {
        values,
        n,
        d: spec.dim(),
        seed,
        z: 1.0,
    })
}

/// `‖x‖_p`.
pub fn norm(x: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `‖X‖_p` for `n` draws of `X`, consistent with [`sample_vector`].
pub fn sample_norms(spec: &IdVectorSpec, p: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(p >= 1.0) {
        return Err(Error::config(format!("norm order p = {p} must be >= 1")));
    }
    map_rows(spec, n, seed, |row| norm(row, p))
}

fn mc(seed: u64, n: usize, confidence: f64, side: &str) -> Provenance {
    Provenance::MonteCarlo {
        seed,
        n: n as u64,
        confidence,
        side: side.to_string(),
    }
}

/// Sample mean of `‖X‖_p` with a CLT interval. Rate functions take
/// `ci_low`.
pub fn estimate_norm_expectation(spec: &IdVectorSpec, p: f64, n: usize, seed: u64, level: f64) -> Result<MeanEstimate> {
    let norms = sample_norms(spec, p, n, seed)?;
    Ok(norms.iter().copied().collect::<Moments>().estimate(level))
}

/// `E‖X‖_p` as a rate input: analytic `E|X_1|` when `d = 1` and a closed
/// form exists, otherwise the lower CLT limit.
pub fn norm_expectation_input(spec: &IdVectorSpec, p: f64, n: usize, seed: u64, level: f64) -> Result<Moment> {
    if spec.dim() == 1 {
        if let Some(v) = marginal::abs_moment(spec.coordinate(0), 1.0) {
            return Ok(Moment::analytic(v));
        }
    }
    let e = estimate_norm_expectation(spec, p, n, seed, level)?;
    if !(e.ci_low > 0.0) {
        return Err(Error::config(format!(
            "lower confidence limit of E‖X‖_p is {}; increase n",
            e.ci_low
        )));
    }
    Ok(Moment {
        value: e.ci_low,
        source: mc(seed, n, level, "lower"),
    })
}

/// `l = -log E e^{-X_1²}` with its interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LEstimate {
    pub point: f64,
    /// Conservative (lower) value used by rate functions.
    pub lower: f64,
    pub upper: f64,
    pub source: Provenance,
}

impl LEstimate {
    pub fn as_moment(&self) -> Moment {
        Moment {
            value: self.lower,
            source: self.source.clone(),
        }
    }
}

/// Analytic when the marginal has a closed-form density or series,
/// otherwise `-log` of the sample mean of `e^{-X²}` (lower `l` from the
/// upper mean limit).
pub fn estimate_l(c: &Coordinate, n: usize, seed: u64, level: f64) -> Result<LEstimate> {
    if let Some(v) = marginal::exp_neg_square(c) {
        let l = -v.ln();
        return Ok(LEstimate {
            point: l,
            lower: l,
            upper: l,
            source: Provenance::Analytic,
        });
    }
    let batch = sample_coordinate(c, 1.0, n, seed)?;
    let est = batch.values.iter().map(|x| (-x * x).exp()).collect::<Moments>().estimate(level);
    let upper_mean = est.ci_high.min(1.0);
    Ok(LEstimate {
        point: -est.mean.ln(),
        lower: -upper_mean.ln(),
        upper: -est.ci_low.max(f64::MIN_POSITIVE).ln(),
        source: mc(seed, n, level, "lower"),
    })
}

/// Which end of a Monte Carlo interval a rate input takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

/// `E|X_1|^q`: analytic when available, else the requested CLT limit.
pub fn abs_moment_input(c: &Coordinate, q: f64, n: usize, seed: u64, level: f64, side: Side) -> Result<Moment> {
    if let Some(v) = marginal::abs_moment(c, q) {
        return Ok(Moment::analytic(v));
    }
    let batch = sample_coordinate(c, 1.0, n, seed)?;
    let est = batch.values.iter().map(|x| x.abs().powf(q)).collect::<Moments>().estimate(level);
    let (value, tag) = match side {
        Side::Lower => (est.ci_low.max(0.0), "lower"),
        Side::Upper => (est.ci_high, "upper"),
    };
    Ok(Moment {
        value,
        source: mc(seed, n, level, tag),
    })
}

/// `E X_1²`: analytic from the Lévy measure and drift.
pub fn second_moment_input(c: &Coordinate) -> Result<Moment> {
    let v = marginal::second_moment(c).ok_or_else(|| Error::config("E X_1² is not available"))?;
    Ok(Moment::analytic(v))
}

/// Moments of the sign-split sums at one `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifiedMomentRow {
    pub z: f64,
    /// `E|Y_z⁺ + Z_z⁺|^p`
    pub plus_p: MeanEstimate,
    /// `E|Y_z⁻ + Z_z⁻|^p`
    pub minus_p: MeanEstimate,
    pub plus_2p: MeanEstimate,
    pub minus_2p: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifiedMoments {
    pub p: f64,
    /// Minimum over `z` and sign of the lower limits of the `p`-th moments,
    /// clamped at 0.
    pub lower: f64,
    /// Maximum over `z` and sign of the upper limits of the `2p`-th moments.
    pub upper: f64,
    pub degenerate: bool,
    pub rows: Vec<ModifiedMomentRow>,
    pub n: usize,
    pub seed: u64,
    pub confidence: f64,
}

impl ModifiedMoments {
    pub fn lower_moment(&self) -> Moment {
        Moment {
            value: self.lower,
            source: mc(self.seed, self.n, self.confidence, "lower"),
        }
    }

    pub fn upper_moment(&self) -> Moment {
        Moment {
            value: self.upper,
            source: mc(self.seed, self.n, self.confidence, "upper"),
        }
    }
}

/// `k + 1` equispaced points on `[0, 1]`.
pub fn z_grid(points: usize) -> Vec<f64> {
    let k = points.max(2) - 1;
    (0..=k).map(|i| i as f64 / k as f64).collect()
}

fn exact(v: f64) -> MeanEstimate {
    MeanEstimate {
        mean: v,
        ci_low: v,
        ci_high: v,
        std_err: 0.0,
        n: 0,
    }
}

fn positive_part(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        0.0
    }
}

fn negative_part(x: f64) -> f64 {
    if x < 0.0 {
        x
    } else {
        0.0
    }
}

/// Modified moments over a `z` grid: `Y_z ~ X_z` and an independent
/// `Z_z ~ X_{1-z}`. At `z ∈ {0, 1}` the sum is `X` itself and the signed
/// parts of `X` are used, analytically when possible.
pub fn estimate_modified_moments(
    c: &Coordinate,
    p: f64,
    z_grid: &[f64],
    n: usize,
    seed: u64,
    level: f64,
) -> Result<ModifiedMoments> {
    if !(p >= 1.0) {
        return Err(Error::config(format!("norm order p = {p} must be >= 1")));
    }
    let endpoint = |q: f64, positive: bool| marginal::signed_part_moment(c, q, positive);
    let mut rows = Vec::with_capacity(z_grid.len());
    for (i, &z) in z_grid.iter().enumerate() {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::config(format!("z = {z} is outside [0, 1]")));
        }
        let at_end = z == 0.0 || z == 1.0;
        if at_end {
            if let (Some(pp), Some(mp), Some(p2), Some(m2)) =
                (endpoint(p, true), endpoint(p, false), endpoint(2.0 * p, true), endpoint(2.0 * p, false))
            {
                rows.push(ModifiedMomentRow {
                    z,
                    plus_p: exact(pp),
                    minus_p: exact(mp),
                    plus_2p: exact(p2),
                    minus_2p: exact(m2),
                });
                continue;
            }
        }
        let ys = MarginalSampler::new(c, z)?;
        let zs = MarginalSampler::new(c, 1.0 - z)?;
        let acc = chunked(n, seed, DOMAIN_MODIFIED << 16 | i as u64, |rng, rows| {
            let mut m = [Moments::default(); 4];
            for _ in 0..rows {
                let y = ys.sample(rng);
                let w = zs.sample(rng);
                let plus = (positive_part(y) + positive_part(w)).abs();
                let minus = (negative_part(y) + negative_part(w)).abs();
                m[0].push(plus.powf(p));
                m[1].push(minus.powf(p));
                m[2].push(plus.powf(2.0 * p));
                m[3].push(minus.powf(2.0 * p));
            }
            m
        });
        let mut total = [Moments::default(); 4];
        for m in &acc {
            for j in 0..4 {
                total[j] = total[j].merge(&m[j]);
            }
        }
        rows.push(ModifiedMomentRow {
            z,
            plus_p: total[0].estimate(level),
            minus_p: total[1].estimate(level),
            plus_2p: total[2].estimate(level),
            minus_2p: total[3].estimate(level),
        });
    }
    let lower = rows
        .iter()
        .flat_map(|r| [r.plus_p.ci_low, r.minus_p.ci_low])
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let upper = rows
        .iter()
        .flat_map(|r| [r.plus_2p.ci_high, r.minus_2p.ci_high])
        .fold(0.0, f64::max);
    Ok(ModifiedMoments {
        p,
        lower,
        upper,
        degenerate: lower <= 0.0,
        rows,
        n,
        seed,
        confidence: level,
    })
}

/// How the center of an empirical tail is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailCentering {
    /// `factor·S + offset` with `S` estimated from the same sample.
    Estimated { stat: CenterStat, factor: f64, offset: f64 },
    Fixed { value: f64 },
}

impl From<&Centering> for TailCentering {
    fn from(c: &Centering) -> Self {
        TailCentering::Estimated {
            stat: c.stat,
            factor: c.factor,
            offset: c.offset,
        }
    }
}

/// Empirical tail of `‖X‖_p` around a center, with two-sided exact
/// binomial intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub x_grid: Vec<f64>,
    pub counts: Vec<u64>,
    pub p_hat: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub n: u64,
    pub seed: u64,
    pub norm_p: f64,
    pub centering_value: f64,
    pub direction: Direction,
    pub confidence: f64,
}

/// Tail counts from precomputed norms.
pub fn tail_from_norms(
    norms: &[f64],
    p: f64,
    x_grid: &[f64],
    seed: u64,
    centering: TailCentering,
    direction: Direction,
    level: f64,
) -> Result<TailEstimate> {
    if norms.is_empty() {
        return Err(Error::config("empirical tail needs at least one sample"));
    }
    let center = match centering {
        TailCentering::Fixed { value } => value,
        TailCentering::Estimated { stat, factor, offset } => {
            let s = match stat {
                CenterStat::Mean => norms.iter().sum::<f64>() / norms.len() as f64,
                CenterStat::RootMeanSquare => (norms.iter().map(|v| v * v).sum::<f64>() / norms.len() as f64).sqrt(),
            };
            factor * s + offset
        }
    };
    let mut sorted = norms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as u64;
    let counts: Vec<u64> = x_grid
        .iter()
        .map(|&x| match direction {
            Direction::Upper => n - sorted.partition_point(|v| *v < center + x) as u64,
            Direction::Lower => sorted.partition_point(|v| *v <= center - x) as u64,
        })
        .collect();
    let (ci_low, ci_high): (Vec<f64>, Vec<f64>) = counts.iter().map(|&k| clopper_pearson(k, n, level)).unzip();
    Ok(TailEstimate {
        x_grid: x_grid.to_vec(),
        p_hat: counts.iter().map(|&k| k as f64 / n as f64).collect(),
        counts,
        ci_low,
        ci_high,
        n,
        seed,
        norm_p: p,
        centering_value: center,
        direction,
        confidence: level,
    })
}

/// Fraction of `n` draws with `‖X‖_p >= center + x` (upper) or
/// `‖X‖_p <= center - x` (lower) for each `x`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_tail(
    spec: &IdVectorSpec,
    p: f64,
    x_grid: &[f64],
    n: usize,
    seed: u64,
    centering: TailCentering,
    direction: Direction,
    level: f64,
) -> Result<TailEstimate> {
    let norms = sample_norms(spec, p, n, seed)?;
    tail_from_norms(&norms, p, x_grid, seed, centering, direction, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplace() -> LevyMeasure1D {
        LevyMeasure1D::symmetric_exponential(1.0).unwrap()
    }

    fn atom() -> LevyMeasure1D {
        LevyMeasure1D::poisson_atom(1.0, 1.0).unwrap()
    }

    fn within(m: &Moments, target: f64, sigmas: f64) -> bool {
        let se = (m.variance() / m.n as f64).sqrt();
        (m.mean - target).abs() <= sigmas * se
    }

    #[test]
    fn deterministic_batches() {
        let a = sample_marginal(&laplace(), 1.0, 10_000, 3).unwrap();
        let b = sample_marginal(&laplace(), 1.0, 10_000, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_marginal(&laplace(), 1.0, 10_000, 4).unwrap();
        assert_ne!(a, c);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| sample_marginal(&laplace(), 1.0, 10_000, 3).unwrap());
        assert_eq!(a, serial);
    }

    #[test]
    fn poisson_half_time_mean() {
        let b = sample_marginal(&atom(), 0.5, 200_000, 11).unwrap();
        let m: Moments = b.values.iter().copied().collect();
        assert!(within(&m, 0.5, 4.0), "mean {}", m.mean);
    }

    #[test]
    fn laplace_variance() {
        let b = sample_marginal(&laplace(), 1.0, 200_000, 12).unwrap();
        let sq: Moments = b.values.iter().map(|x| x * x).collect();
        assert!(within(&sq, 2.0, 4.0), "E X² {}", sq.mean);
    }

    #[test]
    fn gamma_and_compound_means() {
        let g = LevyMeasure1D::gamma_levy(2.0, 1.5).unwrap();
        let m: Moments = sample_marginal(&g, 1.0, 100_000, 5).unwrap().values.into_iter().collect();
        assert!(within(&m, 0.75, 4.0));
        let cp = LevyMeasure1D::compound_poisson(3.0, JumpLaw::Uniform { lo: 0.0, hi: 1.0 }).unwrap();
        let m: Moments = sample_marginal(&cp, 1.0, 100_000, 6).unwrap().values.into_iter().collect();
        assert!(within(&m, 1.5, 4.0));
    }

    #[test]
    fn drift_is_added() {
        let c = Coordinate::centered(atom()).unwrap();
        let m: Moments = sample_coordinate(&c, 1.0, 100_000, 2).unwrap().values.into_iter().collect();
        assert!(within(&m, 0.0, 4.0));
    }

    #[test]
    fn custom_density_approximation() {
        // k(u) = e^{-|u|}/|u|^{1/2} on [-5, 5]: finite variation, singular at 0
        let density = std::sync::Arc::new(|u: f64| (-u.abs()).exp() / u.abs().sqrt());
        let cd = CustomDensity::from_fn(density, -5.0, 5.0, f64::INFINITY, 5.0).unwrap();
        let approx = CompoundApprox::new(&cd).unwrap();
        let total = LevyMeasure1D::CustomDensity(cd.clone()).poly_moment_quadrature(2.0, Tolerance::default()).unwrap();
        assert!(approx.discarded_variance < SMALL_JUMP_VARIANCE * total);
        assert!(approx.delta > 0.0);
        assert_relative_eq!(approx.kept_variance + approx.discarded_variance, total, max_relative = 1e-4);

        let table = CustomDensity::from_table(vec![(0.0, 2.0), (1.0, 0.0)], f64::INFINITY, 1.0).unwrap();
        let approx = CompoundApprox::new(&table).unwrap();
        // ∫_0^1 2(1-u) u² du = 1/6
        assert_relative_eq!(approx.kept_variance + approx.discarded_variance, 1.0 / 6.0, max_relative = 1e-4);
        let c = Coordinate::new(LevyMeasure1D::CustomDensity(table));
        let b = sample_coordinate(&c, 1.0, 200_000, 9).unwrap();
        let m: Moments = b.values.iter().copied().collect();
        // mean ∫ u·2(1-u) = 1/3, variance 1/6
        assert!(within(&m, 1.0 / 3.0, 4.0));
        assert_relative_eq!(m.variance(), 1.0 / 6.0, max_relative = 0.03);
    }

    #[test]
    fn vector_rows_match_norms() {
        let spec = IdVectorSpec::iid(3, Coordinate::new(laplace())).unwrap();
        let b = sample_vector(&spec, 5000, 1).unwrap();
        let norms = sample_norms(&spec, 2.0, 5000, 1).unwrap();
        for (i, n) in norms.iter().enumerate() {
            assert_eq!(norm(b.row(i), 2.0), *n);
        }
        for k in 0..3 {
            let sq: Moments = b.column(k).map(|x| x * x).collect();
            assert!(within(&sq, 2.0, 4.5));
        }
    }

    #[test]
    fn norm_expectation_laplace() {
        let spec = IdVectorSpec::iid(1, Coordinate::new(laplace())).unwrap();
        let e = estimate_norm_expectation(&spec, 2.0, 100_000, 8, 0.99).unwrap();
        assert!(e.ci_low <= 1.0 && 1.0 <= e.ci_high, "{e:?}");
        assert_eq!(norm_expectation_input(&spec, 2.0, 10, 8, 0.99).unwrap().source, Provenance::Analytic);
    }

    #[test]
    fn l_estimates() {
        let lap = estimate_l(&Coordinate::new(laplace()), 10, 0, 0.99).unwrap();
        assert_relative_eq!(lap.lower, -0.545_641_360_765_047_f64.ln(), max_relative = 1e-12);
        let g = Coordinate::with_drift(LevyMeasure1D::gamma_levy(2.0, 1.0).unwrap(), 0.1);
        let e = estimate_l(&g, 50_000, 1, 0.99).unwrap();
        assert!(e.lower <= e.point && e.point <= e.upper && e.lower > 0.0);
    }

    #[test]
    fn modified_moments_poisson_vanish() {
        let c = Coordinate::new(atom());
        let m = estimate_modified_moments(&c, 2.0, &z_grid(5), 20_000, 3, 0.99).unwrap();
        assert_eq!(m.lower, 0.0);
        assert!(m.degenerate);
    }

    #[test]
    fn modified_moments_laplace_symmetric() {
        let c = Coordinate::new(laplace());
        let m = estimate_modified_moments(&c, 2.0, &z_grid(5), 50_000, 3, 0.99).unwrap();
        assert_relative_eq!(m.rows[0].plus_p.mean, 1.0, max_relative = 1e-9);
        for r in &m.rows {
            let gap = (r.plus_p.mean - r.minus_p.mean).abs();
            let se = (r.plus_p.std_err.powi(2) + r.minus_p.std_err.powi(2)).sqrt();
            assert!(gap <= 4.0 * se + 1e-9, "z = {}", r.z);
        }
        assert!(m.lower > 0.0 && m.lower <= 1.0 + 1e-12 && m.upper >= 12.0);
    }

    #[test]
    fn tail_counts() {
        let norms = vec![0.5, 1.0, 2.0, 3.0];
        let t = tail_from_norms(&norms, 2.0, &[-10.0, 0.0, 1.0, 5.0], 0, TailCentering::Fixed { value: 1.0 }, Direction::Upper, 0.99).unwrap();
        assert_eq!(t.counts, vec![4, 3, 2, 0]);
        for i in 0..4 {
            assert!(t.ci_low[i] <= t.p_hat[i] && t.p_hat[i] <= t.ci_high[i]);
        }
        let t = tail_from_norms(&norms, 2.0, &[0.0, 0.5], 0, TailCentering::Fixed { value: 1.0 }, Direction::Lower, 0.99).unwrap();
        assert_eq!(t.counts, vec![2, 1]);
    }

    #[test]
    fn laplace_exact_tail_in_interval() {
        let spec = IdVectorSpec::iid(1, Coordinate::new(laplace())).unwrap();
        let t = empirical_tail(&spec, 2.0, &[2.0], 100_000, 21, TailCentering::Fixed { value: 1.0 }, Direction::Upper, 0.99).unwrap();
        let exact = (-3.0f64).exp();
        assert!(t.ci_low[0] <= exact && exact <= t.ci_high[0]);
    }

    #[test]
    fn csv_export() {
        let b = sample_marginal(&atom(), 1.0, 2, 0).unwrap();
        let csv = b.to_csv();
        assert!(csv.starts_with("x1\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}

//! Command-line arguments and their resolution into library requests.
//!
//! Measure JSON schema, one object with a `family` tag:
//!
//! ```text
//! {"family": "symmetric_exponential", "scale": 1.0}
//! {"family": "gamma_levy", "rate": 1.0, "shape": 1.0}
//! {"family": "poisson_atom", "intensity": 1.0, "jump": 1.0}
//! {"family": "compound_poisson", "rate": 1.0, "jumps": {"law": "uniform", "lo": -1.0, "hi": 1.0}}
//! {"family": "compound_poisson", "rate": 1.0, "jumps": {"law": "discrete", "values": [1.0], "probs": [1.0]}}
//! {"family": "custom_density", "M": 1.0, "R": null, "density_table": [[-3.0, 0.1], [0.0, 1.0], [3.0, 0.1]]}
//! ```
//!
//! `M` and `R` are optional for built-in families and must then agree with
//! the family; `R: null` means unbounded support. `--measure` also takes a
//! path to a file holding such an object, or one of the shorthands
//! `laplace`, `gamma`, `poisson_atom`, `compound_poisson`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use idconc::{
    BoundFamily, BoundRequest, Coordinate, Direction, Error, IdVectorSpec, LevyMeasure1D, MonteCarloConfig,
    NumericConfig, ProjectionSpec, Result,
};

#[derive(Debug, Parser)]
#[command(name = "idconc", version, about = "Dimension-free concentration bounds for norms of infinitely divisible vectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a bound certificate.
    Bound(RunArgs),
    /// Compute a certificate and audit it against a Monte Carlo tail.
    Verify(RunArgs),
    /// Tabulate bounds across lists of d, p and eps.
    Sweep(SweepArgs),
    /// Re-audit a saved certificate against a saved tail estimate.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionArg {
    Upper,
    Lower,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Upper => Direction::Upper,
            DirectionArg::Lower => Direction::Lower,
        }
    }
}

/// Flags shared by every command that builds a certificate.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Bound family: thm1, thm2, thm5_positive, thm5_general, thm4, cor2, cor3, cor4, cor5,
    /// or thm5 to pick the modified-moment rate that fits the measure.
    #[arg(long)]
    pub family: String,
    /// Measure: inline JSON, a path to a JSON file, or a shorthand.
    #[arg(long)]
    pub measure: String,
    /// Drift of each coordinate (uncompensated: E X = drift + ∫u ν).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub drift: f64,
    /// Choose the drift so every coordinate has mean zero.
    #[arg(long, conflicts_with = "drift")]
    pub centered: bool,
    /// Deviation grid `min:max:count:lin|log`.
    #[arg(long = "x")]
    pub x: String,
    #[arg(long, default_value = "upper")]
    pub direction: DirectionArg,
    /// Number of leading coordinates kept by the coordinate projection (cor3, cor4).
    #[arg(long)]
    pub keep: Option<usize>,
    /// Monte Carlo sample size for estimated moment inputs and tails.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, env = "IDCONC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.99)]
    pub confidence: f64,
    /// Grid points in (0, 1) for the modified-moment search.
    #[arg(long, default_value_t = 21)]
    pub z_points: usize,
    /// Relative tolerance of the outer quadratures.
    #[arg(long)]
    pub outer_rel: Option<f64>,
    /// Allowed disagreement between the integral and Legendre forms.
    #[arg(long)]
    pub agreement_rel: Option<f64>,
    #[arg(long, default_value = "csv")]
    pub format: Format,
    /// Output directory; without it the primary artifact goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated dimensions.
    #[arg(long, default_value = "1")]
    pub d: String,
    /// Comma-separated norm exponents.
    #[arg(long, default_value = "2")]
    pub p: String,
    /// Comma-separated relative deviations.
    #[arg(long, default_value = "1")]
    pub eps: String,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Certificate JSON written by `bound` or `verify`.
    #[arg(long)]
    pub certificate: PathBuf,
    /// Tail estimate JSON written by `verify`.
    #[arg(long)]
    pub tail: PathBuf,
    #[arg(long, default_value_t = 0.99)]
    pub confidence: f64,
    #[arg(long, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything that determines an output, embedded in every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub command: String,
    pub family: BoundFamily,
    pub measure: LevyMeasure1D,
    pub drift: f64,
    pub d: Vec<usize>,
    pub p: Vec<f64>,
    pub eps: Vec<f64>,
    pub direction: Direction,
    pub x_spec: String,
    pub x_grid: Vec<f64>,
    pub keep: Option<usize>,
    pub monte_carlo: MonteCarloConfig,
    pub numeric: NumericConfig,
    pub format: Format,
}

pub fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Message of a library error without its category prefix.
pub fn bare(e: Error) -> String {
    match e {
        Error::Config(s) | Error::Domain(s) | Error::Unsupported(s) => s,
        other => other.to_string(),
    }
}

pub fn shorthand(name: &str) -> Option<LevyMeasure1D> {
    use idconc::JumpLaw;
    match name {
        "laplace" | "symmetric_exponential" => LevyMeasure1D::symmetric_exponential(1.0).ok(),
        "gamma" | "gamma_levy" => LevyMeasure1D::gamma_levy(1.0, 1.0).ok(),
        "poisson_atom" | "poisson" => LevyMeasure1D::poisson_atom(1.0, 1.0).ok(),
        "compound_poisson" | "cp_uniform" => {
            LevyMeasure1D::compound_poisson(1.0, JumpLaw::Uniform { lo: -1.0, hi: 1.0 }).ok()
        }
        _ => None,
    }
}

pub fn parse_measure(s: &str) -> Result<LevyMeasure1D> {
    let t = s.trim();
    if t.starts_with('{') {
        return LevyMeasure1D::from_json(t).map_err(|e| cfg_err(format!("--measure: {}", bare(e))));
    }
    if let Some(m) = shorthand(t) {
        return Ok(m);
    }
    let text = std::fs::read_to_string(t)
        .map_err(|e| cfg_err(format!("--measure: '{t}' is neither a known shorthand nor a readable JSON file ({e})")))?;
    LevyMeasure1D::from_json(&text).map_err(|e| cfg_err(format!("--measure {t}: {}", bare(e))))
}

/// `min:max:count:lin|log`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || cfg_err(format!("--x: expected min:max:count:lin|log, got '{s}'"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let min: f64 = parts[0].parse().map_err(|_| bad())?;
    let max: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    let log = match parts[3] {
        "lin" | "linear" => false,
        "log" => true,
        _ => return Err(bad()),
    };
    idconc::pipeline::make_grid(min, max, count, log).map_err(|e| cfg_err(format!("--x: {}", bare(e))))
}

pub fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    let v: std::result::Result<Vec<T>, _> = s.split(',').map(|x| x.trim().parse::<T>()).collect();
    match v {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(cfg_err(format!("--{flag}: expected a comma-separated list, got '{s}'"))),
    }
}

impl CommonArgs {
    /// `thm5` is resolved per measure by [`CommonArgs::request`].
    pub fn family(&self) -> Result<BoundFamily> {
        if self.family == "thm5" {
            let (c, _) = self.coordinate()?;
            return idconc::pipeline::route_thm5(&IdVectorSpec::iid(1, c)?);
        }
        self.family.parse().map_err(|e: Error| cfg_err(format!("--family: {}", bare(e))))
    }

    pub fn coordinate(&self) -> Result<(Coordinate, f64)> {
        let m = parse_measure(&self.measure)?;
        let c = if self.centered {
            Coordinate::centered(m)?
        } else {
            Coordinate::with_drift(m, self.drift)
        };
        let drift = c.drift;
        Ok((c, drift))
    }

    pub fn monte_carlo(&self) -> Result<MonteCarloConfig> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(cfg_err(format!("--confidence: {} must lie in (0, 1)", self.confidence)));
        }
        if self.z_points < 2 {
            return Err(cfg_err("--z-points: need at least 2"));
        }
        Ok(MonteCarloConfig {
            n: self.n,
            seed: self.seed,
            confidence: self.confidence,
            z_points: self.z_points,
        })
    }

    pub fn numeric(&self) -> Result<NumericConfig> {
        let mut cfg = NumericConfig::default();
        for (flag, v, slot) in [
            ("outer-rel", self.outer_rel, &mut cfg.outer_rel),
            ("agreement-rel", self.agreement_rel, &mut cfg.agreement_rel),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return Err(cfg_err(format!("--{flag}: {v} must lie in (0, 1)")));
                }
                *slot = v;
            }
        }
        Ok(cfg)
    }

    /// Vector law and request for one `(d, p, eps)` point.
    pub fn request(&self, d: usize, p: f64, eps: f64) -> Result<(IdVectorSpec, BoundRequest)> {
        if d == 0 {
            return Err(cfg_err("--d: dimension must be at least 1"));
        }
        let (c, _) = self.coordinate()?;
        let spec = IdVectorSpec::iid(d, c)?;
        let family = if self.family == "thm5" { idconc::pipeline::route_thm5(&spec)? } else { self.family()? };
        let mut req = BoundRequest::new(family, parse_grid(&self.x)?)
            .with_p(p)
            .with_eps(eps)
            .with_direction(self.direction.into());
        req.numeric = self.numeric()?;
        if let Some(k) = self.keep {
            if k == 0 || k > d {
                return Err(cfg_err(format!("--keep: {k} must lie in 1..={d}")));
            }
            let cols = (0..d).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
            req = req.with_projection(ProjectionSpec::new(cols, eps)?);
        }
        idconc::pipeline::check_applicable(&spec, &req).map_err(|e| {
            let kind = if matches!(e, Error::Unsupported(_)) { Error::Unsupported } else { Error::Config };
            kind(format!("--family {} with --measure {}: {}", self.family, self.measure, bare(e)))
        })?;
        Ok((spec, req))
    }

    pub fn resolved(&self, command: &str, d: Vec<usize>, p: Vec<f64>, eps: Vec<f64>) -> Result<ResolvedConfig> {
        let (c, drift) = self.coordinate()?;
        Ok(ResolvedConfig {
            command: command.to_string(),
            family: self.family()?,
            measure: c.measure,
            drift,
            d,
            p,
            eps,
            direction: self.direction.into(),
            x_spec: self.x.clone(),
            x_grid: parse_grid(&self.x)?,
            keep: self.keep,
            monte_carlo: self.monte_carlo()?,
            numeric: self.numeric()?,
            format: self.format,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec() {
        assert_eq!(parse_grid("1:3:3:lin").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("0.5:20:40:log").unwrap().len(), 40);
        for bad in ["1:2:3", "1:2:x:lin", "1:2:3:cubic", "2:1:3:lin", "0:1:3:log"] {
            assert!(parse_grid(bad).unwrap_err().to_string().contains("--x"), "{bad}");
        }
    }

    #[test]
    fn measures() {
        assert_eq!(parse_measure("laplace").unwrap().family_name(), "symmetric_exponential");
        let m = parse_measure(r#"{"family":"gamma_levy","rate":2.0,"shape":0.5}"#).unwrap();
        assert_eq!(m.family_name(), "gamma_levy");
        assert!(parse_measure("no_such_measure").unwrap_err().to_string().contains("--measure"));
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<usize>("d", "1,10, 1000").unwrap(), vec![1, 10, 1000]);
        assert!(parse_list::<usize>("d", "1,x").is_err());
    }
}

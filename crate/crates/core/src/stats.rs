//! Confidence intervals used by the sampler and the verification harness.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

/// Two-sided standard normal quantile `z_{1-α/2}` for confidence `level`.
pub fn normal_quantile_two_sided(level: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(0.5 + 0.5 * level)
}

/// Exact binomial (Clopper–Pearson) two-sided interval for `k` successes
/// out of `n` at confidence `level`.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n, "need 0 <= k <= n, n > 0");
    let alpha = 1.0 - level;
    (
        clopper_pearson_lower(k, n, alpha / 2.0),
        clopper_pearson_upper(k, n, alpha / 2.0),
    )
}

/// One-sided lower confidence limit at error probability `alpha`.
pub fn clopper_pearson_lower(k: u64, n: u64, alpha: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let beta = Beta::new(k as f64, (n - k + 1) as f64).expect("beta parameters");
    beta.inverse_cdf(alpha).clamp(0.0, k as f64 / n as f64)
}

/// One-sided upper confidence limit at error probability `alpha`.
pub fn clopper_pearson_upper(k: u64, n: u64, alpha: f64) -> f64 {
    if k == n {
        return 1.0;
    }
    let beta = Beta::new((k + 1) as f64, (n - k) as f64).expect("beta parameters");
    beta.inverse_cdf(1.0 - alpha).clamp(k as f64 / n as f64, 1.0)
}

/// Sample mean with a CLT interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_err: f64,
    pub n: u64,
}

/// Running mean and variance (Welford), mergeable across chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self, level: f64) -> MeanEstimate {
        let z = normal_quantile_two_sided(level);
        let se = (self.variance() / self.n.max(1) as f64).sqrt();
        MeanEstimate {
            mean: self.mean,
            ci_low: self.mean - z * se,
            ci_high: self.mean + z * se,
            std_err: se,
            n: self.n,
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_quantiles() {
        assert_relative_eq!(normal_quantile_two_sided(0.95), 1.959963984540054, max_relative = 1e-9);
        assert_relative_eq!(normal_quantile_two_sided(0.99), 2.5758293035489, max_relative = 1e-9);
    }

    #[test]
    fn clopper_pearson_edges() {
        let (lo, hi) = clopper_pearson(0, 10, 0.95);
        assert_eq!(lo, 0.0);
        // 1 - (0.025)^{1/10}
        assert_relative_eq!(hi, 1.0 - 0.025f64.powf(0.1), max_relative = 1e-9);
        let (lo, hi) = clopper_pearson(10, 10, 0.95);
        assert_relative_eq!(lo, 0.025f64.powf(0.1), max_relative = 1e-9);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn clopper_pearson_brackets_estimate() {
        for (k, n) in [(1, 100), (50, 100), (99, 100), (3, 100_000)] {
            let (lo, hi) = clopper_pearson(k, n, 0.99);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
    }

    #[test]
    fn welford_merge_matches_serial() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let all: Moments = xs.iter().copied().collect();
        let a: Moments = xs[..313].iter().copied().collect();
        let b: Moments = xs[313..].iter().copied().collect();
        let m = a.merge(&b);
        assert_relative_eq!(m.mean, all.mean, max_relative = 1e-12);
        assert_relative_eq!(m.variance(), all.variance(), max_relative = 1e-12);
    }
}

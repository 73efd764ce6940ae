//! Binomial confidence intervals and the Kolmogorov-Smirnov test.

use serde::Serialize;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `errors` successes out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub trials: u64,
    pub errors: u64,
    pub error_probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl SimResult {
    pub fn new(errors: u64, trials: u64, seed: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, trials, Z_95);
        Self {
            trials,
            errors,
            error_probability: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 },
            ci_low,
            ci_high,
            seed,
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// `Pr{K > λ}` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsResult {
    pub samples: usize,
    pub statistic: f64,
    pub p_value: f64,
}

impl KsResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// One-sample KS test of `samples` against a continuous `cdf`.
pub fn ks_test(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let nf = n as f64;
    let statistic = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let root = nf.sqrt();
    // small-sample correction to the asymptotic distribution
    let lambda = (root + 0.12 + 0.11 / root) * statistic;
    KsResult {
        samples: n,
        statistic,
        p_value: if n == 0 { 1.0 } else { kolmogorov_survival(lambda) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macsim::rng::{standard_normal, substream, Domain};
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn wilson_reference_values() {
        // independent evaluation of the score interval formula
        let (lo, hi) = wilson_interval(10, 100, Z_95);
        assert!((lo - 0.055_229_137_060_675_1).abs() < 1e-12, "{lo}");
        assert!((hi - 0.174_365_661_504_913_45).abs() < 1e-12, "{hi}");
        assert_eq!(wilson_interval(0, 0, Z_95), (0.0, 1.0));
        let (lo, hi) = wilson_interval(0, 50, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
        let (lo, hi) = wilson_interval(50, 50, Z_95);
        assert!(lo > 0.9 && hi == 1.0);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Q(λ) at the 5% and 1% critical points
        assert!((kolmogorov_survival(1.358_098_8) - 0.05).abs() < 1e-6);
        assert!((kolmogorov_survival(1.627_624_1) - 0.01).abs() < 1e-6);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(5.0) < 1e-20);
    }

    #[test]
    fn ks_accepts_matching_and_rejects_shifted() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = substream(5, Domain::Identity, 0);
        let draws: Vec<f64> = (0..20_000).map(|_| standard_normal(&mut rng)).collect();
        let ok = ks_test(&mut draws.clone(), |x| normal.cdf(x));
        assert!(!ok.rejects(0.01), "{ok:?}");
        let shifted = ks_test(&mut draws.clone(), |x| normal.cdf(x - 0.1));
        assert!(shifted.rejects(0.01), "{shifted:?}");
    }
}

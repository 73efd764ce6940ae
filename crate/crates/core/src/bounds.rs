//! Finite-blocklength converse on `Σ_{i∈T} log₂ M_i` and its second-order behavior.
//!
//! Everything is in bits. `γ` is the asymptotic average error of the code;
//! the bound is driven by `γ̄ = (1+γ)/2`, the maximal error left after
//! expurgation.

use std::f64::consts::LOG2_E;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::regions::{half_log2_1p, PowerVector, SubsetSpec};
use crate::report::extended_f64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: u64,
    pub gamma: f64,
    pub powers: PowerVector,
    pub subset: SubsetSpec,
}

impl BoundInputs {
    pub fn new(n: u64, gamma: f64, powers: PowerVector, subset: SubsetSpec) -> Result<Self> {
        if n < 1 {
            return invalid("blocklength must be at least 1");
        }
        if !(0.0..1.0).contains(&gamma) {
            return invalid(format!("gamma must lie in [0, 1), got {gamma}"));
        }
        if subset.is_empty() || !subset.fits(powers.len()) {
            return invalid(format!("subset {:?} does not fit {} sources", subset.labels(), powers.len()));
        }
        if powers.subset_sum(subset) <= 0.0 {
            return invalid("total power of the subset must be positive");
        }
        Ok(Self {
            n,
            gamma,
            powers,
            subset,
        })
    }

    pub fn gamma_bar(&self) -> f64 {
        (1.0 + self.gamma) / 2.0
    }

    /// `|P_T| = Σ_{i∈T} P_i`.
    pub fn power_sum(&self) -> f64 {
        self.powers.subset_sum(self.subset)
    }
}

/// The reference output law used against the true channel at one letter:
/// Gaussian with the given mean and variance `1 + |P_T|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxOutputSpec {
    pub mean: f64,
    pub variance: f64,
}

fn check_letter(x: &[f64], means: &[f64], powers: &PowerVector, subset: SubsetSpec) -> Result<()> {
    for v in [x.len(), means.len()] {
        if v != powers.len() {
            return Err(Error::DimensionMismatch {
                expected: powers.len(),
                got: v,
            });
        }
    }
    if subset.is_empty() || !subset.fits(powers.len()) {
        return invalid("subset does not fit the power vector");
    }
    Ok(())
}

/// Mean `Σ_{i∉T} x_i + Σ_{i∈T} E_u[X̂_i]`, variance `1 + |P_T|`.
pub fn aux_output_spec(
    x: &[f64],
    means: &[f64],
    powers: &PowerVector,
    subset: SubsetSpec,
) -> Result<AuxOutputSpec> {
    check_letter(x, means, powers, subset)?;
    let mean = (0..x.len())
        .map(|i| if subset.contains(i) { means[i] } else { x[i] })
        .sum();
    Ok(AuxOutputSpec {
        mean,
        variance: 1.0 + powers.subset_sum(subset),
    })
}

/// `κ₁ = 4|T|·Σ_{i∈T} √P_i` and `κ₂ = 4|T|²·|P_T|·Π_{i∈T}(2√P_i + 3)`.
pub fn kappa_constants(powers: &PowerVector, subset: SubsetSpec) -> Result<(f64, f64)> {
    if subset.is_empty() || !subset.fits(powers.len()) {
        return invalid("subset must be non-empty and fit the power vector");
    }
    let t = subset.len() as f64;
    let root_sum: f64 = subset.members().map(|i| powers.get(i).sqrt()).sum();
    let product: f64 = subset.members().map(|i| 2.0 * powers.get(i).sqrt() + 3.0).product();
    Ok((4.0 * t * root_sum, 4.0 * t * t * powers.subset_sum(subset) * product))
}

fn moments_from_offset(power_sum: f64, b: f64) -> (f64, f64) {
    let mean = half_log2_1p(power_sum) + LOG2_E / (2.0 * (1.0 + power_sum)) * (b * b - power_sum);
    let variance = (power_sum * power_sum + 2.0 * b * b) * LOG2_E * LOG2_E
        / (2.0 * (1.0 + power_sum).powi(2));
    (mean, variance)
}

/// Mean and variance (bits) of the per-letter log-likelihood ratio between
/// the channel and the reference output law, with `b = Σ_{i∈T}(x_i − E_u[X̂_i])`.
pub fn llr_moments(
    x: &[f64],
    means: &[f64],
    powers: &PowerVector,
    subset: SubsetSpec,
) -> Result<(f64, f64)> {
    check_letter(x, means, powers, subset)?;
    let b: f64 = subset.members().map(|i| x[i] - means[i]).sum();
    Ok(moments_from_offset(powers.subset_sum(subset), b))
}

/// `Σ_k mean_k + √((2/(1−γ̄))·Σ_k var_k)` over the letters `(x_k, means_k)`.
pub fn log_xi(
    letters: &[(Vec<f64>, Vec<f64>)],
    gamma_bar: f64,
    powers: &PowerVector,
    subset: SubsetSpec,
) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma_bar) {
        return invalid(format!("gamma_bar must lie in [0, 1), got {gamma_bar}"));
    }
    let (mut mean, mut var) = (0.0, 0.0);
    for (x, m) in letters {
        let (a, v) = llr_moments(x, m, powers, subset)?;
        mean += a;
        var += v;
    }
    Ok(mean + (2.0 / (1.0 - gamma_bar) * var).sqrt())
}

/// The additive pieces of the bound on `Σ_{i∈T} log₂ M_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTerms {
    /// `(n/2)·log₂(1+|P_T|)`.
    pub capacity: f64,
    /// Mean correction `(√(n log₂n)|P_T| + √n κ₁ + κ₂ + |T|²/n)·log₂e / (2(1+|P_T|))`.
    pub mean_correction: f64,
    /// Deviation term scaled by `1/√(1−γ̄)`.
    #[serde(serialize_with = "extended_f64")]
    pub deviation: f64,
    /// `log₂(2/(1−γ̄))`.
    #[serde(serialize_with = "extended_f64")]
    pub chebyshev: f64,
    /// `4|T|(1+3γ̄)/(1−γ̄)·√(n log₂n)`, the price of wringing.
    #[serde(serialize_with = "extended_f64")]
    pub wringing: f64,
    /// `−log₂((1−γ̄)/(2(1+γ̄)))`, the price of expurgation.
    #[serde(serialize_with = "extended_f64")]
    pub expurgation: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.capacity
            + self.mean_correction
            + self.deviation
            + self.chebyshev
            + self.wringing
            + self.expurgation
    }

    /// Everything beyond the capacity term.
    pub fn excess(&self) -> f64 {
        self.total() - self.capacity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: u64,
    pub gamma: f64,
    pub gamma_bar: f64,
    pub subset: SubsetSpec,
    pub power_sum: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub terms: BoundTerms,
    /// Upper bound on `Σ_{i∈T} log₂ M_i`.
    #[serde(serialize_with = "extended_f64")]
    pub sum_log_m_upper: f64,
    /// `sum_log_m_upper / n`.
    #[serde(serialize_with = "extended_f64")]
    pub per_symbol_rate_upper: f64,
    /// `½·log₂(1+|P_T|)`.
    pub per_symbol_capacity: f64,
    /// `(sum_log_m_upper − capacity term) / √(n log₂n)`.
    #[serde(serialize_with = "extended_f64")]
    pub second_order_gap: f64,
    /// Limit of `second_order_gap` as `n → ∞`.
    #[serde(serialize_with = "extended_f64")]
    pub gap_limit: f64,
}

/// `4|T|(1+3γ̄)/(1−γ̄)`.
fn wringing_coefficient(t: f64, gamma_bar: f64) -> f64 {
    4.0 * t * (1.0 + 3.0 * gamma_bar) / (1.0 - gamma_bar)
}

pub fn sum_rate_upper_bound(input: &BoundInputs) -> Result<BoundReport> {
    if input.n < 2 {
        return invalid(format!("blocklength must be at least 2, got {}", input.n));
    }
    let n = input.n as f64;
    let gb = input.gamma_bar();
    let pt = input.power_sum();
    let t = input.subset.len() as f64;
    let (kappa1, kappa2) = kappa_constants(&input.powers, input.subset)?;
    let sqrt_n = n.sqrt();
    let sqrt_nlogn = (n * n.log2()).sqrt();

    let mean_sum = sqrt_nlogn * pt + sqrt_n * kappa1 + kappa2 + t * t / n;
    let terms = BoundTerms {
        capacity: n * half_log2_1p(pt),
        mean_correction: mean_sum * LOG2_E / (2.0 * (1.0 + pt)),
        deviation: (n * pt * (pt + 2.0) + 2.0 * mean_sum).sqrt() * LOG2_E
            / ((1.0 + pt) * (1.0 - gb).sqrt()),
        chebyshev: (2.0 / (1.0 - gb)).log2(),
        wringing: wringing_coefficient(t, gb) * sqrt_nlogn,
        expurgation: -((1.0 - gb) / (2.0 * (1.0 + gb))).log2(),
    };
    let total = terms.total();
    Ok(BoundReport {
        n: input.n,
        gamma: input.gamma,
        gamma_bar: gb,
        subset: input.subset,
        power_sum: pt,
        kappa1,
        kappa2,
        terms,
        sum_log_m_upper: total,
        per_symbol_rate_upper: total / n,
        per_symbol_capacity: half_log2_1p(pt),
        second_order_gap: terms.excess() / sqrt_nlogn,
        gap_limit: gap_limit(input),
    })
}

pub fn second_order_gap(input: &BoundInputs) -> Result<f64> {
    sum_rate_upper_bound(input).map(|r| r.second_order_gap)
}

/// `|P_T|·log₂e/(2(1+|P_T|)) + 4|T|(1+3γ̄)/(1−γ̄)`.
pub fn gap_limit(input: &BoundInputs) -> f64 {
    let pt = input.power_sum();
    pt * LOG2_E / (2.0 * (1.0 + pt)) + wringing_coefficient(input.subset.len() as f64, input.gamma_bar())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn pv(p: &[f64]) -> PowerVector {
        PowerVector::new(p.to_vec()).unwrap()
    }

    fn inputs(n: u64, gamma: f64, p: &[f64]) -> BoundInputs {
        BoundInputs::new(n, gamma, pv(p), SubsetSpec::full(p.len())).unwrap()
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa_constants(&pv(&[1.0, 1.0]), SubsetSpec::full(2)).unwrap(), (16.0, 800.0));
        assert_eq!(kappa_constants(&pv(&[1.0]), SubsetSpec::full(1)).unwrap(), (4.0, 20.0));
        let (k1, k2) = kappa_constants(&pv(&[1e-12]), SubsetSpec::full(1)).unwrap();
        assert!(k1 < 1e-5 && k2 < 1e-10);
        assert!(kappa_constants(&pv(&[1.0]), SubsetSpec::from_mask(0)).is_err());
    }

    #[test]
    fn moment_examples() {
        let p = pv(&[1.0]);
        let t = SubsetSpec::full(1);
        let (m, v) = llr_moments(&[0.3], &[0.3], &p, t).unwrap();
        assert!((m - (0.5 - LOG2_E / 4.0)).abs() < 1e-15);
        assert!((m - 0.139_326_239_777_759).abs() < 1e-12);
        assert!((v - LOG2_E * LOG2_E / 8.0).abs() < 1e-15);
        assert!((v - 0.260_171_122_625_701).abs() < 1e-12);

        let p2 = pv(&[0.7, 1.3]);
        let t2 = SubsetSpec::full(2);
        let b = 2.0f64.sqrt();
        let (m, _) = llr_moments(&[b, 0.0], &[0.0, 0.0], &p2, t2).unwrap();
        assert!((m - 0.5 * 3.0f64.log2()).abs() < 1e-15);

        let (_, v) = llr_moments(&[1.0], &[0.0], &p, t).unwrap();
        assert!((v - 3.0 * LOG2_E * LOG2_E / 8.0).abs() < 1e-15);
        assert!((v - 0.780_513_367_877_103).abs() < 1e-12);
    }

    #[test]
    fn log_xi_examples() {
        let p = pv(&[1.0]);
        let t = SubsetSpec::full(1);
        let n = 7;
        let letters: Vec<_> = (0..n).map(|_| (vec![0.0], vec![0.0])).collect();
        let (m, v) = (0.5 - LOG2_E / 4.0, LOG2_E * LOG2_E / 8.0);
        let got = log_xi(&letters, 0.5, &p, t).unwrap();
        assert!((got - (n as f64 * m + (4.0 * n as f64 * v).sqrt())).abs() < 1e-12);
        assert_eq!(log_xi(&[], 0.5, &p, t).unwrap(), 0.0);
        let got = log_xi(&[(vec![1.0], vec![0.0])], 0.2, &p, t).unwrap();
        let v1 = 3.0 * LOG2_E * LOG2_E / 8.0;
        assert!((got - (0.5 + (2.0 / 0.8 * v1).sqrt())).abs() < 1e-12);
        assert!(log_xi(&letters, 1.0, &p, t).is_err());
    }

    /// The closed forms against sample moments of the defining log-ratio.
    #[test]
    fn llr_moments_match_monte_carlo() {
        let powers = pv(&[1.0, 0.5, 2.0]);
        let subset = SubsetSpec::from_labels(&[1, 3], 3).unwrap();
        let cases = [
            (vec![0.4, -1.1, 0.9], vec![0.1, 0.0, -0.2]),
            (vec![0.0, 0.3, 0.0], vec![0.0, 0.0, 0.0]),
            (vec![-1.2, 0.5, 1.4], vec![0.3, 0.0, 0.1]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples = 1_000_000;
        for (x, means) in cases {
            let (mean, var) = llr_moments(&x, &means, &powers, subset).unwrap();
            let aux = aux_output_spec(&x, &means, &powers, subset).unwrap();
            let centre: f64 = x.iter().sum();
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..samples {
                let z: f64 = StandardNormal.sample(&mut rng);
                let y = centre + z;
                let ln_p = -0.5 * z * z;
                let ln_s = -0.5 * (y - aux.mean).powi(2) / aux.variance - 0.5 * aux.variance.ln();
                let llr = (ln_p - ln_s) * LOG2_E;
                s1 += llr;
                s2 += llr * llr;
            }
            let m_hat = s1 / samples as f64;
            let v_hat = s2 / samples as f64 - m_hat * m_hat;
            let se_mean = (var / samples as f64).sqrt();
            assert!((m_hat - mean).abs() < 3.0 * se_mean, "mean {m_hat} vs {mean}");
            // Var of the sample variance: (μ4 − σ⁴)/N; μ4 ≤ 15σ⁴ covers this quadratic-in-Gaussian LLR
            let se_var = (14.0 * var * var / samples as f64).sqrt();
            assert!((v_hat - var).abs() < 3.0 * se_var, "var {v_hat} vs {var}");
        }
    }

    #[test]
    fn itemized_terms_at_one_million() {
        let r = sum_rate_upper_bound(&inputs(1_000_000, 0.0, &[1.0, 1.0])).unwrap();
        let cap = 0.5 * 3.0f64.log2();
        assert!((r.per_symbol_capacity - 0.792_481).abs() < 1e-6);
        let gap = r.per_symbol_rate_upper - cap;
        assert!(gap > 0.0 && gap < 0.35, "{gap}");
        let n = 1e6f64;
        let wr = 40.0 * (n * n.log2()).sqrt();
        assert!((r.terms.wringing - wr).abs() < 1e-6 * wr);
        assert!((r.terms.wringing / n - 0.178_5).abs() < 1e-3);
        assert!((r.terms.expurgation - 6.0f64.log2()).abs() < 1e-12);
        assert!((r.terms.chebyshev - 2.0).abs() < 1e-12);
        assert!((r.sum_log_m_upper - r.terms.total()).abs() < 1e-6);
    }

    #[test]
    fn converges_to_capacity_and_limit() {
        let cap = 0.5 * 3.0f64.log2();
        let mut prev = f64::INFINITY;
        for e in [3, 6, 9, 12, 15, 18] {
            let r = sum_rate_upper_bound(&inputs(10u64.pow(e), 0.0, &[1.0, 1.0])).unwrap();
            let gap = r.per_symbol_rate_upper - cap;
            assert!(gap > 0.0 && gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-5);
        let lim = gap_limit(&inputs(10, 0.0, &[1.0, 1.0]));
        assert!((lim - (LOG2_E / 3.0 + 40.0)).abs() < 1e-12);
        assert!((lim - 40.480_898).abs() < 1e-6);
        let tiny = gap_limit(&inputs(10, 0.0, &[1e-12]));
        assert!((tiny - 4.0 * 2.5 / 0.5).abs() < 1e-9);
    }

    #[test]
    fn gap_decreases_towards_limit() {
        for gamma in [0.0, 0.5, 0.9] {
            let mut prev = f64::INFINITY;
            for e in 2..=8 {
                let inp = inputs(10u64.pow(e), gamma, &[1.0, 1.0]);
                let g = second_order_gap(&inp).unwrap();
                assert!(g >= gap_limit(&inp) && g < prev);
                prev = g;
            }
        }
    }

    #[test]
    fn gamma_to_one_diverges() {
        let a = sum_rate_upper_bound(&inputs(100, 0.9, &[1.0])).unwrap().sum_log_m_upper;
        let b = sum_rate_upper_bound(&inputs(100, 0.999_999, &[1.0])).unwrap().sum_log_m_upper;
        assert!(b > 1e4 * a / 100.0 && b > a);
    }

    #[test]
    fn rejects_short_blocks() {
        assert!(sum_rate_upper_bound(&inputs(1, 0.0, &[1.0])).is_err());
        assert!(BoundInputs::new(10, 1.0, pv(&[1.0]), SubsetSpec::full(1)).is_err());
    }

    #[test]
    fn theta_sqrt_log_over_n() {
        let cap = 0.5 * 3.0f64.log2();
        let ratios: Vec<f64> = (3..=9)
            .map(|e| {
                let n = 10f64.powi(e);
                let r = sum_rate_upper_bound(&inputs(n as u64, 0.0, &[1.0, 1.0])).unwrap();
                (r.per_symbol_rate_upper - cap) / (n.log2() / n).sqrt()
            })
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
        assert!(lo >= 40.0 && hi <= 45.0, "{ratios:?}");
    }

    proptest! {
        #[test]
        fn monotone_and_non_negative(
            n in 2u64..100_000_000,
            g1 in 0.0f64..0.99,
            g2 in 0.0f64..0.99,
            p in proptest::collection::vec(0.01f64..10.0, 1..4),
            bump in 0.0f64..5.0,
            which in 0usize..4,
        ) {
            let (glo, ghi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let lo = sum_rate_upper_bound(&inputs(n, glo, &p)).unwrap();
            let hi = sum_rate_upper_bound(&inputs(n, ghi, &p)).unwrap();
            prop_assert!(lo.sum_log_m_upper <= hi.sum_log_m_upper * (1.0 + 1e-12));
            let mut q = p.clone();
            let i = which % q.len();
            q[i] += bump;
            let bigger = sum_rate_upper_bound(&inputs(n, glo, &q)).unwrap();
            prop_assert!(lo.sum_log_m_upper <= bigger.sum_log_m_upper * (1.0 + 1e-12));
            let t = lo.terms;
            for v in [t.capacity, t.mean_correction, t.deviation, t.chebyshev, t.wringing, t.expurgation] {
                prop_assert!(v >= 0.0);
            }
            prop_assert!(lo.per_symbol_rate_upper >= lo.per_symbol_capacity);
        }
    }
}

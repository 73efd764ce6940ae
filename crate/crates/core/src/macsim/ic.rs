//! Two-user Gaussian interference channel
//!
//! `Y₁ = x₁ + g₁₂·x₂ + Z₁`, `Y₂ = g₂₁·x₁ + x₂ + Z₂`, unit-variance noise with
//! correlation `ρ`, and the multicast decoders that let each destination
//! recover both messages from its own output under strong interference.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::codebook::{Codebook, GaussianMacConfig, DEFAULT_CAP};
use super::mac::{superpose, MlDecoder};
use super::rng::{fill_standard_normal, pair_index, substream, Domain};
use super::stats::{ks_test, KsResult, SimResult};
use crate::error::{invalid, Error, Result};
use crate::regions::{IcParams, PowerVector};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcConfig {
    n: usize,
    params: IcParams,
    message_sizes: [u64; 2],
    noise_correlation: f64,
    cap: u128,
}

impl IcConfig {
    pub fn new(n: usize, params: IcParams, message_sizes: [u64; 2]) -> Result<Self> {
        if n == 0 {
            return invalid("blocklength must be at least 1");
        }
        if message_sizes.contains(&0) {
            return invalid("every message set needs at least one message");
        }
        Ok(Self {
            n,
            params,
            message_sizes,
            noise_correlation: 0.0,
            cap: DEFAULT_CAP,
        })
    }

    pub fn with_noise_correlation(mut self, rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return invalid(format!("noise correlation must lie in [-1, 1], got {rho}"));
        }
        self.noise_correlation = rho;
        Ok(self)
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &IcParams {
        &self.params
    }

    pub fn message_sizes(&self) -> [u64; 2] {
        self.message_sizes
    }

    pub fn noise_correlation(&self) -> f64 {
        self.noise_correlation
    }

    /// The two-source configuration used to generate codebooks.
    pub fn codebook_config(&self) -> Result<GaussianMacConfig> {
        Ok(GaussianMacConfig::new(
            self.n,
            PowerVector::new(vec![self.params.p1, self.params.p2])?,
            self.message_sizes.to_vec(),
        )?
        .with_cap(self.cap))
    }

    fn check_book(&self, book: &Codebook) -> Result<()> {
        self.codebook_config()?.require_within_cap()?;
        book.matches(&self.codebook_config()?)
    }

    /// Writes `(Y₁, Y₂)` for messages `(w₁, w₂)` with noise drawn from `rng`.
    pub fn outputs<R: Rng + ?Sized>(
        &self,
        book: &Codebook,
        messages: [usize; 2],
        rng: &mut R,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let rho = self.noise_correlation;
        let mut z1 = vec![0.0; n];
        let mut z_extra = vec![0.0; n];
        fill_standard_normal(rng, &mut z1);
        fill_standard_normal(rng, &mut z_extra);
        let side = (1.0 - rho * rho).max(0.0).sqrt();
        let mut y1 = vec![0.0; n];
        let mut y2 = vec![0.0; n];
        superpose(book, &[1.0, self.params.g12], &messages, &mut y1);
        superpose(book, &[self.params.g21, 1.0], &messages, &mut y2);
        for k in 0..n {
            y1[k] += z1[k];
            y2[k] += rho * z1[k] + side * z_extra[k];
        }
        (y1, y2)
    }
}

/// Base decoders `φ₁`, `φ₂` (joint ML at each destination, keeping the
/// intended message) together with the multicast decoders `φ₁′`, `φ₂′`
/// that recover the other message through the other destination's decoder.
#[derive(Debug, Clone)]
pub struct MulticastDecoders<'a> {
    book: &'a Codebook,
    params: IcParams,
    at_first: MlDecoder<'a>,
    at_second: MlDecoder<'a>,
    anchors: [usize; 2],
    aux: [f64; 2],
}

impl<'a> MulticastDecoders<'a> {
    pub fn anchors(&self) -> [usize; 2] {
        self.anchors
    }

    /// Auxiliary-noise coefficients `√(1 − 1/g₁₂²)` and `√(1 − 1/g₂₁²)`.
    pub fn auxiliary_coefficients(&self) -> [f64; 2] {
        self.aux
    }

    pub fn phi1<R: Rng + ?Sized>(&self, y1: &[f64], rng: &mut R) -> usize {
        self.at_first.decode(y1, rng)[0]
    }

    pub fn phi2<R: Rng + ?Sized>(&self, y2: &[f64], rng: &mut R) -> usize {
        self.at_second.decode(y2, rng)[1]
    }

    /// Synthetic destination-2 output built from `y1` and the decision `w1_hat`.
    pub fn first_to_second(&self, y1: &[f64], w1_hat: usize, aux_noise: &[f64]) -> Vec<f64> {
        let anchor = self.book.codeword(0, self.anchors[0]);
        let decided = self.book.codeword(0, w1_hat);
        (0..y1.len())
            .map(|k| {
                self.params.g21 * anchor[k]
                    + (y1[k] - decided[k]) / self.params.g12
                    + self.aux[0] * aux_noise[k]
            })
            .collect()
    }

    /// Synthetic destination-1 output built from `y2` and the decision `w2_hat`.
    pub fn second_to_first(&self, y2: &[f64], w2_hat: usize, aux_noise: &[f64]) -> Vec<f64> {
        let anchor = self.book.codeword(1, self.anchors[1]);
        let decided = self.book.codeword(1, w2_hat);
        (0..y2.len())
            .map(|k| {
                (y2[k] - decided[k]) / self.params.g21
                    + self.params.g12 * anchor[k]
                    + self.aux[1] * aux_noise[k]
            })
            .collect()
    }

    /// `(φ₁(y₁), φ₁′(y₁))`: both messages as decided at destination 1.
    pub fn multicast_first<R: Rng + ?Sized>(&self, y1: &[f64], rng: &mut R) -> [usize; 2] {
        let w1 = self.phi1(y1, rng);
        let mut noise = vec![0.0; y1.len()];
        fill_standard_normal(rng, &mut noise);
        let v = self.first_to_second(y1, w1, &noise);
        [w1, self.phi2(&v, rng)]
    }

    /// `(φ₂′(y₂), φ₂(y₂))`: both messages as decided at destination 2.
    pub fn multicast_second<R: Rng + ?Sized>(&self, y2: &[f64], rng: &mut R) -> [usize; 2] {
        let w2 = self.phi2(y2, rng);
        let mut noise = vec![0.0; y2.len()];
        fill_standard_normal(rng, &mut noise);
        let v = self.second_to_first(y2, w2, &noise);
        [self.phi1(&v, rng), w2]
    }
}

fn aux_coefficient(g: f64) -> f64 {
    (1.0 - 1.0 / (g * g)).max(0.0).sqrt()
}

fn base_decoders<'a>(ic: &IcConfig, book: &'a Codebook) -> Result<(MlDecoder<'a>, MlDecoder<'a>)> {
    ic.check_book(book)?;
    let p = ic.params;
    Ok((
        MlDecoder::new(book, vec![1.0, p.g12], ic.cap)?,
        MlDecoder::new(book, vec![p.g21, 1.0], ic.cap)?,
    ))
}

pub fn ic_multicast_decoders<'a>(
    ic: &IcConfig,
    book: &'a Codebook,
    anchors: [usize; 2],
) -> Result<MulticastDecoders<'a>> {
    ic.params.require_strong()?;
    let (at_first, at_second) = base_decoders(ic, book)?;
    for (i, &a) in anchors.iter().enumerate() {
        if a >= book.message_sizes()[i] {
            return invalid(format!("anchor {a} outside message set {}", i + 1));
        }
    }
    Ok(MulticastDecoders {
        book,
        params: ic.params,
        at_first,
        at_second,
        anchors,
        aux: [aux_coefficient(ic.params.g12), aux_coefficient(ic.params.g21)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorChoice {
    pub anchors: [usize; 2],
    /// `Pr{φ₂ wrong | W₁ = w₁}` for each `w₁`.
    pub second_error_given_first: Vec<f64>,
    /// `Pr{φ₁ wrong | W₂ = w₂}` for each `w₂`.
    pub first_error_given_second: Vec<f64>,
}

fn argmin(values: &[f64]) -> usize {
    // first minimum: ties go to the smallest index
    values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best })
        .0
}

/// Picks `w₁*` minimizing the measured error of `φ₂` given `W₁ = w₁*`, and
/// `w₂*` minimizing that of `φ₁` given `W₂ = w₂*`.
pub fn choose_anchors(ic: &IcConfig, book: &Codebook, trials_per_message: u64, seed: u64) -> Result<AnchorChoice> {
    if trials_per_message == 0 {
        return invalid("at least one trial per message is required");
    }
    let (at_first, at_second) = base_decoders(ic, book)?;
    let sizes = book.message_sizes();
    let measure = |fixed: usize| -> Vec<f64> {
        let other = 1 - fixed;
        (0..sizes[fixed])
            .into_par_iter()
            .map(|w| {
                let mut rng = substream(seed, Domain::IcAnchor, pair_index(fixed as u64, w as u64));
                let mut wrong = 0u64;
                for _ in 0..trials_per_message {
                    let mut messages = [0; 2];
                    messages[fixed] = w;
                    messages[other] = rng.random_range(0..sizes[other]);
                    let (y1, y2) = ic.outputs(book, messages, &mut rng);
                    let decided = if other == 1 {
                        at_second.decode(&y2, &mut rng)[1]
                    } else {
                        at_first.decode(&y1, &mut rng)[0]
                    };
                    wrong += u64::from(decided != messages[other]);
                }
                wrong as f64 / trials_per_message as f64
            })
            .collect()
    };
    let second_error_given_first = measure(0);
    let first_error_given_second = measure(1);
    Ok(AnchorChoice {
        anchors: [argmin(&second_error_given_first), argmin(&first_error_given_second)],
        second_error_given_first,
        first_error_given_second,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcSimReport {
    pub anchors: AnchorChoice,
    /// `Pr{φ_k ≠ W_k}` at destination `k`.
    pub plain: [SimResult; 2],
    /// `Pr{(φ_k, φ_k′) ≠ (W₁, W₂)}` at destination `k`.
    pub multicast: [SimResult; 2],
    /// `ε̂₁ + ε̂₂ + 3·√(h₁² + h₂² + h_k²)` with `h` the interval half-widths.
    pub allowance: [f64; 2],
    pub bound_holds: [bool; 2],
}

impl IcSimReport {
    pub fn all_hold(&self) -> bool {
        self.bound_holds.iter().all(|&b| b)
    }
}

/// Paired simulation of the plain IC code and the multicast code built from it.
pub fn simulate_ic(
    ic: &IcConfig,
    book: &Codebook,
    trials: u64,
    anchor_trials: u64,
    seed: u64,
) -> Result<IcSimReport> {
    let anchors = choose_anchors(ic, book, anchor_trials, seed)?;
    let dec = ic_multicast_decoders(ic, book, anchors.anchors)?;
    let sizes = book.message_sizes();
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, Domain::IcTrial, t);
            let w = [rng.random_range(0..sizes[0]), rng.random_range(0..sizes[1])];
            let (y1, y2) = ic.outputs(book, w, &mut rng);
            let first = dec.multicast_first(&y1, &mut rng);
            let second = dec.multicast_second(&y2, &mut rng);
            [
                u64::from(first[0] != w[0]),
                u64::from(second[1] != w[1]),
                u64::from(first != w),
                u64::from(second != w),
            ]
        })
        .reduce(|| [0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    let plain = [
        SimResult::new(counts[0], trials, seed),
        SimResult::new(counts[1], trials, seed),
    ];
    let multicast = [
        SimResult::new(counts[2], trials, seed),
        SimResult::new(counts[3], trials, seed),
    ];
    let base = plain[0].error_probability + plain[1].error_probability;
    let spread = plain[0].half_width().powi(2) + plain[1].half_width().powi(2);
    let allowance = [0, 1].map(|k| base + 3.0 * (spread + multicast[k].half_width().powi(2)).sqrt());
    let bound_holds = [0, 1].map(|k| multicast[k].error_probability <= allowance[k]);
    Ok(IcSimReport {
        anchors,
        plain,
        multicast,
        allowance,
        bound_holds,
    })
}

/// KS test that the synthetic destination-2 output built at destination 1,
/// when `φ₁` decides correctly, has the law of `g₂₁·x₁(w₁*) + x₂(W₂) + Z₂`
/// at one time index.
pub fn identity_ks_test(
    ic: &IcConfig,
    decoders: &MulticastDecoders,
    samples: usize,
    coordinate: usize,
    seed: u64,
) -> Result<KsResult> {
    let book = decoders.book;
    ic.check_book(book)?;
    if coordinate >= ic.n {
        return invalid(format!("coordinate {coordinate} outside blocklength {}", ic.n));
    }
    let sizes = book.message_sizes();
    let mut draws: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, Domain::Identity, s);
            let w = [rng.random_range(0..sizes[0]), rng.random_range(0..sizes[1])];
            let (y1, _) = ic.outputs(book, w, &mut rng);
            let mut aux = vec![0.0; ic.n];
            fill_standard_normal(&mut rng, &mut aux);
            decoders.first_to_second(&y1, w[0], &aux)[coordinate]
        })
        .collect();
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Invariant(e.to_string()))?;
    let anchor = book.codeword(0, decoders.anchors[0])[coordinate];
    let centres: Vec<f64> = (0..sizes[1])
        .map(|w2| ic.params.g21 * anchor + book.codeword(1, w2)[coordinate])
        .collect();
    let cdf = |v: f64| centres.iter().map(|c| normal.cdf(v - c)).sum::<f64>() / centres.len() as f64;
    Ok(ks_test(&mut draws, cdf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macsim::codebook::{generate_codebook, CodebookKind};

    fn setup(g12: f64, g21: f64, sizes: [u64; 2], n: usize, seed: u64) -> (IcConfig, Codebook) {
        let ic = IcConfig::new(n, IcParams::new(1.0, 1.0, g12, g21).unwrap(), sizes).unwrap();
        let book = generate_codebook(&ic.codebook_config().unwrap(), CodebookKind::Sphere, seed).unwrap();
        (ic, book)
    }

    #[test]
    fn unit_gains_have_no_auxiliary_noise() {
        let (ic, book) = setup(1.0, 1.0, [3, 2], 4, 1);
        let dec = ic_multicast_decoders(&ic, &book, [1, 0]).unwrap();
        assert_eq!(dec.auxiliary_coefficients(), [0.0, 0.0]);
        let y1 = [0.3, -1.0, 2.0, 0.5];
        let v = dec.first_to_second(&y1, 2, &[9.0; 4]);
        for k in 0..4 {
            let expected = book.codeword(0, 1)[k] + y1[k] - book.codeword(0, 2)[k];
            assert!((v[k] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn gain_two_scales_residual_and_noise() {
        let (ic, book) = setup(2.0, 1.0, [2, 2], 3, 2);
        let dec = ic_multicast_decoders(&ic, &book, [0, 0]).unwrap();
        let c = dec.auxiliary_coefficients()[0];
        assert!((c - 0.866_025_403_784_438_6).abs() < 1e-15);
        let y1 = [1.0, 2.0, 3.0];
        let noise = [0.5, -0.5, 1.0];
        let v = dec.first_to_second(&y1, 1, &noise);
        for k in 0..3 {
            let expected = book.codeword(0, 0)[k] + 0.5 * (y1[k] - book.codeword(0, 1)[k]) + c * noise[k];
            assert!((v[k] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn weak_interference_is_rejected() {
        let (ic, book) = setup(0.5, 2.0, [2, 2], 3, 2);
        assert!(matches!(
            ic_multicast_decoders(&ic, &book, [0, 0]),
            Err(Error::WeakInterference { .. })
        ));
        assert!(simulate_ic(&ic, &book, 10, 10, 0).is_err());
    }

    #[test]
    fn correlated_noise_statistics() {
        let ic = IcConfig::new(1, IcParams::new(1.0, 1.0, 1.0, 1.0).unwrap(), [1, 1])
            .unwrap()
            .with_noise_correlation(0.6)
            .unwrap();
        let book = Codebook::from_codewords(&[vec![vec![0.0]], vec![vec![0.0]]]).unwrap();
        let mut rng = substream(4, Domain::IcTrial, 0);
        let draws = 200_000;
        let (mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0);
        for _ in 0..draws {
            let (y1, y2) = ic.outputs(&book, [0, 0], &mut rng);
            s11 += y1[0] * y1[0];
            s22 += y2[0] * y2[0];
            s12 += y1[0] * y2[0];
        }
        let d = draws as f64;
        assert!((s11 / d - 1.0).abs() < 0.02);
        assert!((s22 / d - 1.0).abs() < 0.02);
        assert!((s12 / d - 0.6).abs() < 0.02);
        assert!(ic.clone().with_noise_correlation(1.5).is_err());
    }

    #[test]
    fn zero_rate_code_never_errs() {
        let (ic, book) = setup(1.5, 1.5, [1, 1], 4, 3);
        let r = simulate_ic(&ic, &book, 500, 10, 5).unwrap();
        for k in 0..2 {
            assert_eq!(r.plain[k].errors, 0);
            assert_eq!(r.multicast[k].errors, 0);
        }
        assert!(r.all_hold());
    }

    #[test]
    fn anchors_take_first_minimum() {
        assert_eq!(argmin(&[0.3, 0.1, 0.1, 0.2]), 1);
        assert_eq!(argmin(&[0.0, 0.0]), 0);
    }

    #[test]
    fn moderate_rate_symmetric_bound() {
        let (ic, book) = setup(1.5, 1.5, [4, 4], 6, 8);
        let r = simulate_ic(&ic, &book, 20_000, 2_000, 9).unwrap();
        assert!(r.plain[0].errors > 0);
        assert!(r.all_hold(), "{r:?}");
    }

    #[test]
    fn near_vacuous_bound_still_holds() {
        let (ic, book) = setup(1.2, 1.2, [24, 24], 2, 10);
        let r = simulate_ic(&ic, &book, 5_000, 200, 11).unwrap();
        let sum = r.plain[0].error_probability + r.plain[1].error_probability;
        assert!(sum > 0.9, "{sum}");
        assert!(r.all_hold(), "{r:?}");
    }

    #[test]
    fn synthetic_output_has_target_law() {
        let (ic, book) = setup(2.0, 1.5, [4, 5], 3, 12);
        let dec = ic_multicast_decoders(&ic, &book, [2, 0]).unwrap();
        let ks = identity_ks_test(&ic, &dec, 100_000, 1, 13).unwrap();
        assert!(!ks.rejects(0.01), "{ks:?}");
        let correlated = ic.clone().with_noise_correlation(-0.7).unwrap();
        let ks = identity_ks_test(&correlated, &dec, 100_000, 2, 14).unwrap();
        assert!(!ks.rejects(0.01), "{ks:?}");
    }
}

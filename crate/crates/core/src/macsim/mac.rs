//! Exhaustive maximum-likelihood decoding and error-probability estimation
//! for the Gaussian MAC `Y = Σ_i x_i(W_i) + Z`, `Z ~ N(0, I_n)`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::codebook::{generate_codebook, Codebook, CodebookKind, GaussianMacConfig};
use super::rng::{fill_standard_normal, substream, Domain};
use super::stats::SimResult;
use crate::error::{invalid, Error, Result};
use crate::expurgation::CodeErrorProfile;
use crate::regions::{sum_capacity, PowerVector};

/// Relative tolerance under which two metrics count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Joint ML decoder for `y = Σ_i g_i x_i(w_i) + z` over every message tuple.
///
/// Ties among minimizers are broken uniformly at random.
#[derive(Debug, Clone)]
pub struct MlDecoder<'a> {
    book: &'a Codebook,
    gains: Vec<f64>,
    /// `‖Σ_i g_i x_i(w_i)‖²` per tuple, row-major, last source fastest.
    norms: Vec<f64>,
}

impl<'a> MlDecoder<'a> {
    pub fn new(book: &'a Codebook, gains: Vec<f64>, cap: u128) -> Result<Self> {
        if gains.len() != book.sources() {
            return Err(Error::DimensionMismatch {
                expected: book.sources(),
                got: gains.len(),
            });
        }
        let count = book
            .message_sizes()
            .iter()
            .fold(1u128, |acc, &m| acc.saturating_mul(m as u128));
        if count > cap {
            return Err(Error::CapExceeded { count, cap });
        }
        let sizes = book.message_sizes();
        let sources = sizes.len();
        // pairwise Gram blocks between scaled codebooks
        let gram = |i: usize, j: usize| -> Vec<f64> {
            let mut out = Vec::with_capacity(sizes[i] * sizes[j]);
            for a in 0..sizes[i] {
                for b in 0..sizes[j] {
                    out.push(gains[i] * gains[j] * dot(book.codeword(i, a), book.codeword(j, b)));
                }
            }
            out
        };
        let own: Vec<Vec<f64>> = (0..sources)
            .map(|i| {
                (0..sizes[i])
                    .map(|a| gains[i] * gains[i] * dot(book.codeword(i, a), book.codeword(i, a)))
                    .collect()
            })
            .collect();
        let cross: Vec<Vec<Vec<f64>>> = (0..sources)
            .map(|i| (0..sources).map(|j| if i < j { gram(i, j) } else { Vec::new() }).collect())
            .collect();
        let count = count as usize;
        let mut norms = Vec::with_capacity(count);
        let mut digits = vec![0usize; sources];
        for _ in 0..count {
            let mut s = 0.0;
            for i in 0..sources {
                s += own[i][digits[i]];
                for j in i + 1..sources {
                    s += 2.0 * cross[i][j][digits[i] * sizes[j] + digits[j]];
                }
            }
            norms.push(s);
            advance(&mut digits, sizes);
        }
        Ok(Self { book, gains, norms })
    }

    pub fn book(&self) -> &Codebook {
        self.book
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn tuple_count(&self) -> usize {
        self.norms.len()
    }

    /// Message tuple minimizing `‖y − Σ_i g_i x_i(w_i)‖`.
    pub fn decode<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Vec<usize> {
        let sizes = self.book.message_sizes();
        let projections: Vec<Vec<f64>> = (0..sizes.len())
            .map(|i| {
                (0..sizes[i])
                    .map(|w| 2.0 * self.gains[i] * dot(y, self.book.codeword(i, w)))
                    .collect()
            })
            .collect();
        let mut digits = vec![0usize; sizes.len()];
        let mut best = digits.clone();
        let mut best_metric = f64::INFINITY;
        let mut ties = 0u64;
        for &norm in &self.norms {
            let mut metric = norm;
            for (i, &d) in digits.iter().enumerate() {
                metric -= projections[i][d];
            }
            if metric < best_metric && !tied(metric, best_metric) {
                best_metric = metric;
                best.copy_from_slice(&digits);
                ties = 1;
            } else if tied(metric, best_metric) {
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    best.copy_from_slice(&digits);
                }
            }
            advance(&mut digits, sizes);
        }
        best
    }
}

fn tied(a: f64, b: f64) -> bool {
    a == b || (b.is_finite() && (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0))
}

fn advance(digits: &mut [usize], sizes: &[usize]) {
    for (d, &m) in digits.iter_mut().zip(sizes).rev() {
        *d += 1;
        if *d < m {
            return;
        }
        *d = 0;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Writes `Σ_i g_i x_i(w_i)` into `out`.
pub(crate) fn superpose(book: &Codebook, gains: &[f64], messages: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, (&w, &g)) in messages.iter().zip(gains).enumerate() {
        for (o, x) in out.iter_mut().zip(book.codeword(i, w)) {
            *o += g * x;
        }
    }
}

/// One channel use of blocklength `n`: `Σ_i x_i(w_i) + z` with fresh noise from `rng`.
pub fn mac_output<R: Rng + ?Sized>(book: &Codebook, messages: &[usize], rng: &mut R) -> Vec<f64> {
    let mut noise = vec![0.0; book.n()];
    fill_standard_normal(rng, &mut noise);
    let mut y = vec![0.0; book.n()];
    superpose(book, &vec![1.0; book.sources()], messages, &mut y);
    y.iter_mut().zip(&noise).for_each(|(a, z)| *a += z);
    y
}

fn decode_once<R: Rng + ?Sized>(decoder: &MlDecoder, messages: &[usize], rng: &mut R) -> bool {
    let y = mac_output(decoder.book(), messages, rng);
    decoder.decode(&y, rng) != messages
}

/// Empirical average error probability with uniform message tuples.
pub fn simulate_mac_error(
    cfg: &GaussianMacConfig,
    book: &Codebook,
    trials: u64,
    seed: u64,
) -> Result<SimResult> {
    cfg.require_within_cap()?;
    book.matches(cfg)?;
    let decoder = MlDecoder::new(book, vec![1.0; book.sources()], cfg.cap())?;
    let sizes = book.message_sizes();
    let errors = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = substream(seed, Domain::MacTrial, t);
            let messages: Vec<usize> = sizes.iter().map(|&m| rng.random_range(0..m)).collect();
            decode_once(&decoder, &messages, &mut rng)
        })
        .count() as u64;
    Ok(SimResult::new(errors, trials, seed))
}

/// Per-tuple empirical error probabilities `e(w)` from `trials_per_tuple` runs each.
pub fn measure_error_profile(
    cfg: &GaussianMacConfig,
    book: &Codebook,
    trials_per_tuple: u64,
    seed: u64,
) -> Result<CodeErrorProfile> {
    let count = cfg.require_within_cap()?;
    book.matches(cfg)?;
    if trials_per_tuple == 0 {
        return invalid("at least one trial per tuple is required");
    }
    let needed = count as u128 * trials_per_tuple as u128;
    if needed > cfg.profile_budget() {
        return Err(Error::BudgetExceeded {
            needed,
            budget: cfg.profile_budget(),
        });
    }
    let decoder = MlDecoder::new(book, vec![1.0; book.sources()], cfg.cap())?;
    let sizes = book.message_sizes();
    let errors: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|t| {
            let mut messages = vec![0; sizes.len()];
            let mut rest = t;
            for (slot, &m) in messages.iter_mut().zip(sizes).rev() {
                *slot = rest % m;
                rest /= m;
            }
            let wrong = (0..trials_per_tuple)
                .filter(|&j| {
                    let mut rng = substream(seed, Domain::Profile, t as u64 * trials_per_tuple + j);
                    decode_once(&decoder, &messages, &mut rng)
                })
                .count();
            wrong as f64 / trials_per_tuple as f64
        })
        .collect();
    CodeErrorProfile::new(cfg.message_sizes().to_vec(), errors)
}

/// `⌈2^{nR}⌉`, ignoring float noise just above an integer.
pub fn message_size_for_rate(n: usize, rate: f64) -> f64 {
    let v = (n as f64 * rate).exp2();
    (v * (1.0 - 1e-12)).ceil().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub multiplier: f64,
    pub n: usize,
    pub message_sizes: Vec<u64>,
    pub result: SimResult,
}

pub const SCAN_HEADER: &str = "multiplier,n,Mi,error,ci_lo,ci_hi";

impl ScanRow {
    pub fn csv(&self) -> String {
        let sizes: Vec<String> = self.message_sizes.iter().map(u64::to_string).collect();
        format!(
            "{},{},{},{},{},{}",
            self.multiplier,
            self.n,
            sizes.join(";"),
            self.result.error_probability,
            self.result.ci_low,
            self.result.ci_high
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub kind: CodebookKind,
    pub cap: u128,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            kind: CodebookKind::Sphere,
            cap: super::codebook::DEFAULT_CAP,
        }
    }
}

/// Error probability at the equal-rate point `R_i = m·C_sum/N` for every
/// `(m, n)`, each with a fresh random codebook.
///
/// All rows are checked against the cap before any simulation runs.
pub fn phase_transition_scan(
    powers: &PowerVector,
    multipliers: &[f64],
    n_list: &[usize],
    trials: u64,
    seed: u64,
    options: &ScanOptions,
) -> Result<Vec<ScanRow>> {
    if let Some(m) = multipliers.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return invalid(format!("rate multiplier must be non-negative, got {m}"));
    }
    let sources = powers.len();
    let per_source = sum_capacity(powers) / sources as f64;
    let mut configs = Vec::new();
    for &m in multipliers {
        for &n in n_list {
            let size = message_size_for_rate(n, m * per_source);
            let count = size.powi(sources as i32);
            if !(count <= options.cap as f64) {
                return Err(Error::CapExceeded {
                    count: if count.is_finite() { count as u128 } else { u128::MAX },
                    cap: options.cap,
                });
            }
            let cfg = GaussianMacConfig::new(n, powers.clone(), vec![size as u64; sources])?
                .with_cap(options.cap);
            configs.push((m, cfg));
        }
    }
    configs
        .into_iter()
        .enumerate()
        .map(|(row, (multiplier, cfg))| {
            let mut rng = substream(seed, Domain::Scan, row as u64);
            let book_seed: u64 = rng.random();
            let trial_seed: u64 = rng.random();
            let book = generate_codebook(&cfg, options.kind, book_seed)?;
            let result = simulate_mac_error(&cfg, &book, trials, trial_seed)?;
            Ok(ScanRow {
                multiplier,
                n: cfg.n(),
                message_sizes: cfg.message_sizes().to_vec(),
                result: SimResult { seed, ..result },
            })
        })
        .collect()
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from(SCAN_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv());
        out.push('\n');
    }
    out
}

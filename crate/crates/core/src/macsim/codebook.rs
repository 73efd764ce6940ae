//! Random codebooks under a per-codeword energy constraint and their binary
//! exchange format.
//!
//! Layout: magic `MACB1`, then `n`, `N`, `M_1 … M_N` as little-endian `u64`,
//! then each source's `M_i × n` matrix of little-endian `f64`, row-major.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::rng::{fill_standard_normal, pair_index, substream, Domain};
use crate::error::{invalid, Error, Result};
use crate::regions::{PowerVector, MAX_SOURCES};

pub const MAGIC: &[u8; 5] = b"MACB1";
pub const DEFAULT_CAP: u128 = 1 << 20;
pub const DEFAULT_PROFILE_BUDGET: u128 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianMacConfig {
    n: usize,
    powers: PowerVector,
    message_sizes: Vec<u64>,
    cap: u128,
    profile_budget: u128,
}

impl GaussianMacConfig {
    pub fn new(n: usize, powers: PowerVector, message_sizes: Vec<u64>) -> Result<Self> {
        if n == 0 {
            return invalid("blocklength must be at least 1");
        }
        if message_sizes.len() != powers.len() {
            return Err(Error::DimensionMismatch {
                expected: powers.len(),
                got: message_sizes.len(),
            });
        }
        if message_sizes.iter().any(|&m| m == 0) {
            return invalid("every message set needs at least one message");
        }
        Ok(Self {
            n,
            powers,
            message_sizes,
            cap: DEFAULT_CAP,
            profile_budget: DEFAULT_PROFILE_BUDGET,
        })
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_profile_budget(mut self, budget: u128) -> Self {
        self.profile_budget = budget;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn powers(&self) -> &PowerVector {
        &self.powers
    }

    pub fn message_sizes(&self) -> &[u64] {
        &self.message_sizes
    }

    pub fn sources(&self) -> usize {
        self.message_sizes.len()
    }

    pub fn cap(&self) -> u128 {
        self.cap
    }

    pub fn profile_budget(&self) -> u128 {
        self.profile_budget
    }

    /// `Π M_i`, saturating.
    pub fn tuple_count(&self) -> u128 {
        self.message_sizes
            .iter()
            .fold(1u128, |acc, &m| acc.saturating_mul(m as u128))
    }

    pub fn require_within_cap(&self) -> Result<usize> {
        let count = self.tuple_count();
        if count > self.cap {
            return Err(Error::CapExceeded {
                count,
                cap: self.cap,
            });
        }
        Ok(count as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookKind {
    /// Uniform on the sphere of radius `√(nP)`.
    Sphere,
    /// iid `N(0, P)` entries, pulled back onto the sphere when outside it.
    IidScaled,
}

impl FromStr for CodebookKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "iid" | "iid_gauss_scaled" | "iid-scaled" => Ok(Self::IidScaled),
            other => invalid(format!("unknown codebook kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n: usize,
    sizes: Vec<usize>,
    matrices: Vec<Vec<f64>>,
}

impl Codebook {
    /// Builds from one flat `M_i × n` row-major matrix per source.
    pub fn from_matrices(n: usize, sizes: Vec<usize>, matrices: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Codebook("blocklength must be at least 1".into()));
        }
        if sizes.is_empty() || sizes.len() > MAX_SOURCES {
            return Err(Error::TooManySources(sizes.len()));
        }
        if sizes.len() != matrices.len() {
            return Err(Error::DimensionMismatch {
                expected: sizes.len(),
                got: matrices.len(),
            });
        }
        for (&m, rows) in sizes.iter().zip(&matrices) {
            if m == 0 {
                return Err(Error::Codebook("empty message set".into()));
            }
            if rows.len() != m * n {
                return Err(Error::DimensionMismatch {
                    expected: m * n,
                    got: rows.len(),
                });
            }
            if rows.iter().any(|v| !v.is_finite()) {
                return Err(Error::Codebook("non-finite codeword entry".into()));
            }
        }
        Ok(Self { n, sizes, matrices })
    }

    /// Builds from nested `[source][message][time]` codewords.
    pub fn from_codewords(codewords: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n = codewords
            .first()
            .and_then(|b| b.first())
            .map_or(0, Vec::len);
        let sizes = codewords.iter().map(Vec::len).collect();
        let mut matrices = Vec::with_capacity(codewords.len());
        for book in codewords {
            if book.iter().any(|x| x.len() != n) {
                return Err(Error::Codebook("codewords differ in length".into()));
            }
            matrices.push(book.concat());
        }
        Self::from_matrices(n, sizes, matrices)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sources(&self) -> usize {
        self.sizes.len()
    }

    pub fn message_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn matrix(&self, source: usize) -> &[f64] {
        &self.matrices[source]
    }

    pub fn codeword(&self, source: usize, message: usize) -> &[f64] {
        &self.matrices[source][message * self.n..(message + 1) * self.n]
    }

    pub fn codeword_mut(&mut self, source: usize, message: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.matrices[source][message * n..(message + 1) * n]
    }

    pub fn to_codewords(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.sources())
            .map(|i| {
                self.matrices[i]
                    .chunks(self.n)
                    .map(<[f64]>::to_vec)
                    .collect()
            })
            .collect()
    }

    /// Fails on the first codeword with `‖x‖² > nP_i`.
    pub fn check_power(&self, powers: &PowerVector) -> Result<()> {
        if powers.len() != self.sources() {
            return Err(Error::DimensionMismatch {
                expected: self.sources(),
                got: powers.len(),
            });
        }
        for (i, &p) in powers.as_slice().iter().enumerate() {
            let limit = self.n as f64 * p;
            for w in 0..self.sizes[i] {
                let energy = energy(self.codeword(i, w));
                if energy > limit {
                    return Err(Error::PowerViolation {
                        source_index: i,
                        message: w,
                        energy,
                        limit,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn matches(&self, cfg: &GaussianMacConfig) -> Result<()> {
        let sizes_match = self.n == cfg.n()
            && self.sizes.len() == cfg.sources()
            && self
                .sizes
                .iter()
                .zip(cfg.message_sizes())
                .all(|(&a, &b)| a as u64 == b);
        if !sizes_match {
            return Err(Error::Codebook(format!(
                "codebook shape n={} M={:?} does not match configuration n={} M={:?}",
                self.n,
                self.sizes,
                cfg.n(),
                cfg.message_sizes()
            )));
        }
        self.check_power(cfg.powers())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&(self.sizes.len() as u64).to_le_bytes())?;
        for &m in &self.sizes {
            out.write_all(&(m as u64).to_le_bytes())?;
        }
        for rows in &self.matrices {
            for v in rows {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Codebook(format!("truncated or unreadable input: {e}"));
        let mut magic = [0u8; 5];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Codebook("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |input: &mut R| -> Result<u64> {
            input.read_exact(&mut word).map_err(io)?;
            Ok(u64::from_le_bytes(word))
        };
        let n = next_u64(&mut input)?;
        let sources = next_u64(&mut input)?;
        if sources == 0 || sources > MAX_SOURCES as u64 {
            return Err(Error::TooManySources(sources as usize));
        }
        let mut sizes = Vec::with_capacity(sources as usize);
        for _ in 0..sources {
            sizes.push(next_u64(&mut input)?);
        }
        let entries: Vec<usize> = sizes
            .iter()
            .map(|&m| {
                m.checked_mul(n)
                    .and_then(|e| usize::try_from(e).ok())
                    .filter(|&e| e <= 1 << 32)
                    .ok_or_else(|| Error::Codebook("codebook too large".into()))
            })
            .collect::<Result<_>>()?;
        let mut matrices = Vec::with_capacity(sizes.len());
        for count in entries {
            let mut rows = Vec::with_capacity(count);
            for _ in 0..count {
                rows.push(f64::from_le_bytes(next_u64(&mut input)?.to_le_bytes()));
            }
            matrices.push(rows);
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest).map_err(io)? != 0 {
            return Err(Error::Codebook("trailing bytes after codebook".into()));
        }
        Self::from_matrices(
            n as usize,
            sizes.into_iter().map(|m| m as usize).collect(),
            matrices,
        )
    }
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Rescales `x` onto the ball of squared radius `limit`, then shaves the last
/// few ulps so that the stored vector satisfies `‖x‖² ≤ limit` as computed.
fn clamp_to_ball(x: &mut [f64], limit: f64) {
    let e = energy(x);
    if e <= limit {
        return;
    }
    let scale = (limit / e).sqrt();
    x.iter_mut().for_each(|v| *v *= scale);
    while energy(x) > limit {
        x.iter_mut().for_each(|v| *v *= 1.0 - f64::EPSILON);
    }
}

fn scale_to_sphere(x: &mut [f64], limit: f64) {
    let e = energy(x);
    let scale = (limit / e).sqrt();
    x.iter_mut().for_each(|v| *v *= scale);
    clamp_to_ball(x, limit);
}

pub fn generate_codebook(cfg: &GaussianMacConfig, kind: CodebookKind, seed: u64) -> Result<Codebook> {
    let n = cfg.n();
    let mut matrices = Vec::with_capacity(cfg.sources());
    let mut sizes = Vec::with_capacity(cfg.sources());
    for (i, (&m, &p)) in cfg
        .message_sizes()
        .iter()
        .zip(cfg.powers().as_slice())
        .enumerate()
    {
        let m = usize::try_from(m)
            .ok()
            .filter(|&m| m.checked_mul(n).is_some_and(|e| e <= 1 << 32))
            .ok_or_else(|| Error::Codebook(format!("source {} codebook too large", i + 1)))?;
        let limit = n as f64 * p;
        let mut rows = vec![0.0; m * n];
        for (w, x) in rows.chunks_mut(n).enumerate() {
            let mut rng = substream(seed, Domain::Codebook, pair_index(i as u64, w as u64));
            match kind {
                CodebookKind::Sphere => {
                    loop {
                        fill_standard_normal(&mut rng, x);
                        if energy(x) > 0.0 {
                            break;
                        }
                    }
                    scale_to_sphere(x, limit);
                }
                CodebookKind::IidScaled => {
                    fill_standard_normal(&mut rng, x);
                    let sd = p.sqrt();
                    x.iter_mut().for_each(|v| *v *= sd);
                    clamp_to_ball(x, limit);
                }
            }
        }
        matrices.push(rows);
        sizes.push(m);
    }
    Codebook::from_matrices(n, sizes, matrices)
}

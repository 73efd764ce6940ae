//! Polyhedral capacity regions.
//!
//! The Cover-Wyner region of an N-source Gaussian MAC is the intersection of
//! `2^N - 1` half-spaces, one per non-empty subset of sources. The two-user
//! Gaussian interference channel under strong interference has a five-sided
//! region built from the same `½·log₂(1 + snr)` building block.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Upper limit on the number of sources; `2^20 - 1` constraints is the most we enumerate.
pub const MAX_SOURCES: usize = 20;

/// Default additive slack (bits) applied to every membership test.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// `½·log₂(1 + snr)`, accurate for small `snr`.
pub fn half_log2_1p(snr: f64) -> f64 {
    0.5 * snr.ln_1p() / std::f64::consts::LN_2
}

/// Per-source transmit powers, linear SNR units.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        if powers.is_empty() {
            return invalid("power vector must have at least one source");
        }
        if let Some((i, p)) = powers
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return invalid(format!("power of source {} must be positive, got {p}", i + 1));
        }
        Ok(Self(powers))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, source: usize) -> f64 {
        self.0[source]
    }

    /// `Σ_{i∈T} P_i`, accumulated in increasing source order.
    pub fn subset_sum(&self, subset: SubsetSpec) -> f64 {
        subset.members().map(|i| self.0[i]).fold(0.0, |acc, p| acc + p)
    }
}

/// Per-source rates in bits per channel use.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RateTuple(Vec<f64>);

impl RateTuple {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some((i, r)) = rates
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r >= 0.0))
        {
            return invalid(format!("rate of source {} must be non-negative, got {r}", i + 1));
        }
        Ok(Self(rates))
    }

    pub fn origin(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn subset_sum(&self, subset: SubsetSpec) -> f64 {
        subset.members().map(|i| self.0[i]).fold(0.0, |acc, r| acc + r)
    }
}

/// A subset of source indices, stored as a bitmask (bit `i` is source `i + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetSpec {
    mask: u32,
}

impl SubsetSpec {
    pub fn from_mask(mask: u32) -> Self {
        Self { mask }
    }

    /// Builds a subset from 1-based source labels, checking them against `num_sources`.
    pub fn from_labels(labels: &[usize], num_sources: usize) -> Result<Self> {
        if num_sources > MAX_SOURCES {
            return Err(Error::TooManySources(num_sources));
        }
        let mut mask = 0u32;
        for &label in labels {
            if label == 0 || label > num_sources {
                return invalid(format!("source label {label} outside 1..={num_sources}"));
            }
            mask |= 1 << (label - 1);
        }
        Ok(Self { mask })
    }

    /// All sources `{1..n}`.
    pub fn full(num_sources: usize) -> Self {
        debug_assert!(num_sources <= MAX_SOURCES);
        Self {
            mask: ((1u64 << num_sources) - 1) as u32,
        }
    }

    pub fn mask(self) -> u32 {
        self.mask
    }

    pub fn is_empty(self) -> bool {
        self.mask == 0
    }

    pub fn len(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(self, source: usize) -> bool {
        source < 32 && self.mask & (1 << source) != 0
    }

    /// 0-based member indices in increasing order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mask = self.mask;
        (0..32).filter(move |i| mask & (1 << i) != 0)
    }

    /// 1-based labels, as used in reports.
    pub fn labels(self) -> Vec<usize> {
        self.members().map(|i| i + 1).collect()
    }

    pub fn complement(self, num_sources: usize) -> Self {
        Self {
            mask: !self.mask & Self::full(num_sources).mask,
        }
    }

    pub fn fits(self, num_sources: usize) -> bool {
        self.mask & !Self::full(num_sources).mask == 0
    }
}

impl Serialize for SubsetSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels().serialize(serializer)
    }
}

/// One half-space `Σ_{i∈T} R_i ≤ bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constraint {
    pub subset: SubsetSpec,
    pub bound: f64,
}

/// The `2^N − 1` Cover-Wyner constraints, ordered by subset bitmask.
pub fn cover_wyner_constraints(powers: &PowerVector) -> Result<Vec<Constraint>> {
    let n = powers.len();
    if n > MAX_SOURCES {
        return Err(Error::TooManySources(n));
    }
    Ok((1..(1u32 << n))
        .map(|mask| {
            let subset = SubsetSpec::from_mask(mask);
            Constraint {
                subset,
                bound: half_log2_1p(powers.subset_sum(subset)),
            }
        })
        .collect())
}

/// `½·log₂(1 + Σ_i P_i)`.
pub fn sum_capacity(powers: &PowerVector) -> f64 {
    half_log2_1p(powers.subset_sum(SubsetSpec::full(powers.len())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub inside: bool,
    pub violated_subset: Option<SubsetSpec>,
}

pub fn contains(powers: &PowerVector, rates: &RateTuple) -> Result<Membership> {
    contains_with_tolerance(powers, rates, DEFAULT_TOLERANCE)
}

/// Membership in the Cover-Wyner region; reports the first violated subset in bitmask order.
pub fn contains_with_tolerance(
    powers: &PowerVector,
    rates: &RateTuple,
    tolerance: f64,
) -> Result<Membership> {
    if rates.len() != powers.len() {
        return Err(Error::DimensionMismatch {
            expected: powers.len(),
            got: rates.len(),
        });
    }
    if !(tolerance >= 0.0) {
        return invalid("tolerance must be non-negative");
    }
    for c in cover_wyner_constraints(powers)? {
        if rates.subset_sum(c.subset) > c.bound + tolerance {
            return Ok(Membership {
                inside: false,
                violated_subset: Some(c.subset),
            });
        }
    }
    Ok(Membership {
        inside: true,
        violated_subset: None,
    })
}

/// Two-user Gaussian IC parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcParams {
    pub p1: f64,
    pub p2: f64,
    pub g12: f64,
    pub g21: f64,
}

impl IcParams {
    pub fn new(p1: f64, p2: f64, g12: f64, g21: f64) -> Result<Self> {
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !(p.is_finite() && p > 0.0) {
                return invalid(format!("{name} must be positive, got {p}"));
            }
        }
        if !(g12.is_finite() && g21.is_finite()) {
            return invalid("cross gains must be finite");
        }
        Ok(Self { p1, p2, g12, g21 })
    }

    /// Interference power received at destination 1: `g12²·P₂`.
    pub fn i1(&self) -> f64 {
        self.g12 * self.g12 * self.p2
    }

    /// Interference power received at destination 2: `g21²·P₁`.
    pub fn i2(&self) -> f64 {
        self.g21 * self.g21 * self.p1
    }

    pub fn is_strong(&self) -> bool {
        self.g12 * self.g12 >= 1.0 && self.g21 * self.g21 >= 1.0
    }

    pub fn require_strong(&self) -> Result<()> {
        if self.is_strong() {
            Ok(())
        } else {
            Err(Error::WeakInterference {
                g12_sq: self.g12 * self.g12,
                g21_sq: self.g21 * self.g21,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HkRegion {
    pub r1_max: f64,
    pub r2_max: f64,
    /// `½·log₂(1 + P₁ + I₁)` and `½·log₂(1 + P₂ + I₂)`.
    pub sum_candidates: [f64; 2],
    pub sum_max: f64,
}

impl HkRegion {
    pub fn contains(&self, r1: f64, r2: f64, tolerance: f64) -> bool {
        r1 >= 0.0
            && r2 >= 0.0
            && r1 <= self.r1_max + tolerance
            && r2 <= self.r2_max + tolerance
            && r1 + r2 <= self.sum_max + tolerance
    }
}

/// Han-Kobayashi region of the IC under strong interference.
pub fn hk_strong_interference_region(ic: &IcParams) -> Result<HkRegion> {
    ic.require_strong()?;
    let sum_candidates = [half_log2_1p(ic.p1 + ic.i1()), half_log2_1p(ic.p2 + ic.i2())];
    Ok(HkRegion {
        r1_max: half_log2_1p(ic.p1),
        r2_max: half_log2_1p(ic.p2),
        sum_candidates,
        sum_max: sum_candidates[0].min(sum_candidates[1]),
    })
}

//! Symmetric scalar quantizer on the grid `{-LΔ, …, 0, …, LΔ}`.
//!
//! Non-negative inputs round down, negative inputs round up, so the output
//! never has larger magnitude than the input. Grid points are carried as
//! integer indices; the real value is `index · Δ`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Relative slack on the domain edge absorbed by clamping.
const DOMAIN_SLACK: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizerSpec {
    levels: u64,
    precision: f64,
}

/// A point of the quantization grid, `index · precision`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct GridPoint(pub i64);

impl QuantizerSpec {
    pub fn new(levels: u64, precision: f64) -> Result<Self> {
        if levels == 0 {
            return invalid("quantizer needs at least one level");
        }
        if levels > (1u64 << 52) {
            return invalid(format!("{levels} levels cannot be indexed exactly"));
        }
        if !(precision.is_finite() && precision > 0.0) {
            return invalid(format!("quantizer precision must be positive, got {precision}"));
        }
        Ok(Self { levels, precision })
    }

    pub fn levels(&self) -> u64 {
        self.levels
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }

    /// `LΔ`, the largest representable magnitude.
    pub fn bound(&self) -> f64 {
        self.levels as f64 * self.precision
    }

    /// Number of grid points, `2L + 1`.
    pub fn cardinality(&self) -> u64 {
        2 * self.levels + 1
    }

    pub fn value(&self, point: GridPoint) -> f64 {
        point.0 as f64 * self.precision
    }

    pub fn contains(&self, point: GridPoint) -> bool {
        point.0.unsigned_abs() <= self.levels
    }

    pub fn quantize(&self, x: f64) -> Result<GridPoint> {
        let bound = self.bound();
        if !x.is_finite() || x.abs() > bound * (1.0 + DOMAIN_SLACK) {
            return Err(Error::OutOfDomain { value: x, bound });
        }
        let magnitude = self.floor_index(x.abs().min(bound));
        Ok(GridPoint(if x < 0.0 { -magnitude } else { magnitude }))
    }

    pub fn quantize_vec(&self, xs: &[f64]) -> Result<Vec<GridPoint>> {
        xs.iter().map(|&x| self.quantize(x)).collect()
    }

    pub fn quantize_values(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter()
            .map(|&x| self.quantize(x).map(|g| self.value(g)))
            .collect()
    }

    /// Largest `k ≤ L` with `k·Δ ≤ a` (as evaluated in floating point) for `a ≥ 0`.
    fn floor_index(&self, a: f64) -> i64 {
        let levels = self.levels as i64;
        let mut k = ((a / self.precision).floor() as i64).clamp(0, levels);
        while k > 0 && k as f64 * self.precision > a {
            k -= 1;
        }
        while k < levels && (k + 1) as f64 * self.precision <= a {
            k += 1;
        }
        k
    }
}

/// The per-source quantizer used on length-`n` codewords with power `p`:
/// `L = ⌈n·√(n·p)⌉`, `Δ = 1/n`.
pub fn code_quantizer_spec(n: usize, power: f64) -> Result<QuantizerSpec> {
    if n == 0 {
        return invalid("blocklength must be at least 1");
    }
    if !(power.is_finite() && power > 0.0) {
        return invalid(format!("power must be positive, got {power}"));
    }
    let nf = n as f64;
    let levels = (nf * (nf * power).sqrt()).ceil() as u64;
    QuantizerSpec::new(levels.max(1), 1.0 / nf)
}

/// Right-hand side of the alphabet-size bound `n^{3|T|/2} · Π_{i∈T} (2√P_i + 3)`.
pub fn alphabet_size_bound(n: usize, powers: &[f64]) -> f64 {
    let nf = n as f64;
    powers
        .iter()
        .map(|p| nf.powf(1.5) * (2.0 * p.sqrt() + 3.0))
        .product()
}

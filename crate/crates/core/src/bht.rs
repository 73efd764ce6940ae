//! Neyman-Pearson binary hypothesis testing on finite alphabets.
//!
//! `β_δ(p‖q)` is the smallest type-II probability `Σ r(x)q(x)` over
//! randomized tests `r` with `Σ r(x)p(x) ≥ δ`. The optimum accepts symbols in
//! decreasing order of likelihood ratio `p/q` and randomizes on a single
//! boundary symbol.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Allowed deviation of `Σ masses` from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FiniteDistribution(Vec<f64>);

impl FiniteDistribution {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::NotADistribution("empty alphabet".into()));
        }
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m >= 0.0))
        {
            return Err(Error::NotADistribution(format!("mass {m} at symbol {i}")));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotADistribution(format!("masses sum to {total}")));
        }
        Ok(Self(masses))
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::NotADistribution(format!("weights sum to {total}")));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::NotADistribution("empty alphabet".into()));
        }
        Ok(Self(vec![1.0 / size as f64; size]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.0
    }

    pub fn mass(&self, symbol: usize) -> f64 {
        self.0[symbol]
    }

    /// Distribution of `g(X)` for `X ~ self`; the image alphabet is `0..=max(g)`.
    pub fn pushforward(&self, mapping: &[usize]) -> Result<Self> {
        if mapping.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: mapping.len(),
            });
        }
        let size = mapping.iter().max().map_or(0, |m| m + 1);
        let mut out = vec![0.0; size];
        for (&m, &g) in self.0.iter().zip(mapping) {
            out[g] += m;
        }
        Ok(Self(out))
    }
}

/// Per-symbol acceptance probabilities `r(1|x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct BinaryTest(Vec<f64>);

impl BinaryTest {
    pub fn new(accept: Vec<f64>) -> Result<Self> {
        if accept.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return invalid("acceptance probabilities must lie in [0, 1]");
        }
        Ok(Self(accept))
    }

    pub fn accept_probs(&self) -> &[f64] {
        &self.0
    }

    /// `Σ r(x)·d(x)`.
    pub fn acceptance_mass(&self, d: &FiniteDistribution) -> f64 {
        self.0.iter().zip(d.masses()).map(|(r, m)| r * m).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaResult {
    pub beta: f64,
    pub test: BinaryTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TieOrder {
    Ascending,
    Descending,
}

fn check_pair(delta: f64, p: &FiniteDistribution, q: &FiniteDistribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if !(0.0..=1.0).contains(&delta) {
        return invalid(format!("delta must lie in [0, 1], got {delta}"));
    }
    Ok(())
}

/// Likelihood-ratio order: `a` before `b` when `p(a)/q(a) > p(b)/q(b)`, with `q = 0` as `+∞`.
fn ratio_order(p: &[f64], q: &[f64], a: usize, b: usize) -> Ordering {
    let (pa, qa, pb, qb) = (p[a], q[a], p[b], q[b]);
    match (qa == 0.0, qb == 0.0) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        // pa/qa vs pb/qb without dividing
        (false, false) => (pb * qa).total_cmp(&(pa * qb)),
    }
}

/// Exact `β_δ(p‖q)` and a test attaining it.
pub fn beta(delta: f64, p: &FiniteDistribution, q: &FiniteDistribution) -> Result<BetaResult> {
    beta_ordered(delta, p, q, TieOrder::Ascending)
}

pub(crate) fn beta_ordered(
    delta: f64,
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    ties: TieOrder,
) -> Result<BetaResult> {
    check_pair(delta, p, q)?;
    let (pm, qm) = (p.masses(), q.masses());
    // symbols with p = 0 never help meet the constraint
    let mut order: Vec<usize> = (0..pm.len()).filter(|&x| pm[x] > 0.0).collect();
    if ties == TieOrder::Descending {
        order.reverse();
    }
    order.sort_by(|&a, &b| ratio_order(pm, qm, a, b));

    let mut accept = vec![0.0; pm.len()];
    let mut covered = 0.0;
    let mut beta = 0.0;
    for &x in &order {
        let remaining = delta - covered;
        if remaining <= 0.0 {
            break;
        }
        let r = if pm[x] <= remaining { 1.0 } else { remaining / pm[x] };
        accept[x] = r;
        covered += r * pm[x];
        beta += r * qm[x];
    }
    Ok(BetaResult {
        beta,
        test: BinaryTest(accept),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpiCheck {
    pub holds: bool,
    pub beta_original: f64,
    pub beta_processed: f64,
}

/// Checks `β_δ(p‖q) ≤ β_δ(p∘g⁻¹‖q∘g⁻¹)`; a `false` result means the NP routine is wrong.
pub fn verify_dpi(
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    mapping: &[usize],
    delta: f64,
) -> Result<DpiCheck> {
    let beta_original = beta(delta, p, q)?.beta;
    let beta_processed = beta(delta, &p.pushforward(mapping)?, &q.pushforward(mapping)?)?.beta;
    Ok(DpiCheck {
        holds: beta_original <= beta_processed + 1e-12,
        beta_original,
        beta_processed,
    })
}

/// `(1/ξ)·(δ − Pr_p{p(X)/q(X) ≥ ξ})`.
///
/// Symbols whose ratio equals `ξ` up to relative rounding are counted in the
/// tail, which can only lower the bound.
pub fn beta_lower_bound(
    delta: f64,
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    xi: f64,
) -> Result<f64> {
    check_pair(delta, p, q)?;
    if !(xi.is_finite() && xi > 0.0) {
        return invalid(format!("xi must be positive, got {xi}"));
    }
    let tail: f64 = p
        .masses()
        .iter()
        .zip(q.masses())
        .filter(|(&pm, &qm)| pm > 0.0 && pm >= xi * qm * (1.0 - 1e-12))
        .map(|(pm, _)| pm)
        .sum();
    Ok((delta - tail) / xi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodingBoundRow {
    pub u: usize,
    pub beta: f64,
    pub q_u: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodingBoundReport {
    pub alpha: f64,
    pub rows: Vec<DecodingBoundRow>,
}

impl DecodingBoundReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// For a joint law of (message `U`, estimate `V`) on `m × m` symbols
/// (row-major, `U` is the row), checks `β_{1−α}(p_{V|U=u}‖q_V) ≤ q_V(u)`
/// for every `u` with positive probability.
pub fn verify_decoding_bound(
    joint: &FiniteDistribution,
    qv: &FiniteDistribution,
) -> Result<DecodingBoundReport> {
    let m = qv.len();
    if joint.len() != m * m {
        return Err(Error::DimensionMismatch {
            expected: m * m,
            got: joint.len(),
        });
    }
    let mut conditionals = Vec::new();
    let mut alpha: f64 = 0.0;
    for u in 0..m {
        let row = &joint.masses()[u * m..(u + 1) * m];
        let marginal: f64 = row.iter().sum();
        if marginal <= 0.0 {
            continue;
        }
        let cond = FiniteDistribution::from_weights(row)?;
        alpha = alpha.max(1.0 - cond.mass(u));
        conditionals.push((u, cond));
    }
    if alpha >= 1.0 - 1e-15 {
        return Err(Error::Precondition(
            "some message is decoded incorrectly with certainty (alpha = 1)".into(),
        ));
    }
    let delta = (1.0 - alpha).clamp(0.0, 1.0);
    let rows = conditionals
        .into_iter()
        .map(|(u, cond)| {
            let b = beta(delta, &cond, qv).map(|r| r.beta)?;
            Ok(DecodingBoundRow {
                u,
                beta: b,
                q_u: qv.mass(u),
                holds: b <= qv.mass(u) + 1e-12,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecodingBoundReport { alpha, rows })
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Test-only reference solvers that do not share code with `beta`.
    use super::FiniteDistribution;

    /// LP optimum by enumerating every deterministic acceptance set plus at
    /// most one fractional boundary symbol (the LP's vertices).
    pub fn lp_beta(delta: f64, p: &FiniteDistribution, q: &FiniteDistribution) -> f64 {
        let (pm, qm) = (p.masses(), q.masses());
        let k = pm.len();
        let mut best = f64::INFINITY;
        for set in 0u32..(1 << k) {
            let (mut ps, mut qs) = (0.0, 0.0);
            for x in 0..k {
                if set & (1 << x) != 0 {
                    ps += pm[x];
                    qs += qm[x];
                }
            }
            if ps >= delta - 1e-15 {
                best = best.min(qs);
            }
            for b in 0..k {
                if set & (1 << b) != 0 || pm[b] <= 0.0 {
                    continue;
                }
                let r = (delta - ps) / pm[b];
                if (0.0..=1.0).contains(&r) {
                    best = best.min(qs + r * qm[b]);
                }
            }
        }
        best
    }

    /// Minimum over all tests with acceptance probabilities on a `1/steps` grid.
    pub fn grid_beta(delta: f64, p: &FiniteDistribution, q: &FiniteDistribution, steps: u32) -> f64 {
        let k = p.len();
        let mut idx = vec![0u32; k];
        let mut best = f64::INFINITY;
        loop {
            let (mut ps, mut qs) = (0.0, 0.0);
            for x in 0..k {
                let r = idx[x] as f64 / steps as f64;
                ps += r * p.mass(x);
                qs += r * q.mass(x);
            }
            if ps >= delta - 1e-15 {
                best = best.min(qs);
            }
            let mut pos = 0;
            loop {
                if pos == k {
                    return best;
                }
                idx[pos] += 1;
                if idx[pos] <= steps {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
}

//! Turning an average-error code into a maximal-error subcode.
//!
//! Keep the `⌊((1−ε)/(1+ε))·ΠM_i⌋` message tuples with the smallest error,
//! then keep only those that share the most common tail `w_{T^c}`. Markov's
//! inequality caps every kept error at `(1+ε)/2`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::regions::SubsetSpec;

/// Slack allowed when comparing the empirical average to `ε`.
pub const AVERAGE_TOLERANCE: f64 = 1e-12;

/// Per-tuple error probabilities, row-major with the last source's message fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeErrorProfile {
    message_sizes: Vec<u64>,
    errors: Vec<f64>,
}

impl CodeErrorProfile {
    pub fn new(message_sizes: Vec<u64>, errors: Vec<f64>) -> Result<Self> {
        if message_sizes.is_empty() || message_sizes.len() > crate::regions::MAX_SOURCES {
            return Err(Error::TooManySources(message_sizes.len()));
        }
        if message_sizes.iter().any(|&m| m == 0) {
            return invalid("every message set needs at least one message");
        }
        let total = message_sizes
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(usize::try_from(m).ok()?));
        let Some(total) = total else {
            return invalid("tuple space does not fit in memory");
        };
        if errors.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: errors.len(),
            });
        }
        if let Some(e) = errors.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return invalid(format!("error probability {e} outside [0, 1]"));
        }
        Ok(Self {
            message_sizes,
            errors,
        })
    }

    pub fn message_sizes(&self) -> &[u64] {
        &self.message_sizes
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn sources(&self) -> usize {
        self.message_sizes.len()
    }

    pub fn tuple_count(&self) -> usize {
        self.errors.len()
    }

    pub fn average_error(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }

    /// Messages (0-based) of the tuple at a row-major position.
    pub fn tuple(&self, mut index: usize) -> Vec<u64> {
        let mut out = vec![0; self.message_sizes.len()];
        for (slot, &m) in out.iter_mut().zip(&self.message_sizes).rev() {
            *slot = (index as u64) % m;
            index /= m as usize;
        }
        out
    }

    pub fn index(&self, tuple: &[u64]) -> usize {
        tuple
            .iter()
            .zip(&self.message_sizes)
            .fold(0usize, |acc, (&w, &m)| acc * m as usize + w as usize)
    }

    pub fn error(&self, tuple: &[u64]) -> f64 {
        self.errors[self.index(tuple)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpurgationResult {
    pub subset: SubsetSpec,
    /// Full message tuples of the subcode, in increasing row-major order.
    pub support: Vec<Vec<u64>>,
    /// The same tuples restricted to the sources in `subset`.
    pub support_projection: Vec<Vec<u64>>,
    /// Messages of the sources outside `subset`, shared by all of `support`.
    pub fixed_tail: Vec<u64>,
    pub max_error: f64,
    /// `(1+ε)/2`.
    pub error_cap: f64,
    /// `⌊((1−ε)/(1+ε))·Π_all M_i⌋`, the size of the low-error set.
    pub low_error_count: u64,
    /// `((1−ε)/(2(1+ε)))·Π_{i∈T} M_i`.
    pub size_bound: f64,
    /// `(2(1+ε)/(1−ε)) / Π_{i∈T} M_i`, the cap on the uniform mass of each projected tuple.
    pub mass_bound: f64,
}

impl ExpurgationResult {
    pub fn size(&self) -> usize {
        self.support.len()
    }

    /// Uniform probability of each tuple in `support_projection`.
    pub fn uniform_mass(&self) -> f64 {
        1.0 / self.support_projection.len() as f64
    }
}

fn product_over(sizes: &[u64], members: &[usize]) -> f64 {
    members.iter().map(|&i| sizes[i] as f64).product()
}

/// `⌊x⌋` with a tiny tolerance, so `0.25·4` counts as `1`.
fn floor_tol(x: f64) -> f64 {
    (x + 1e-9 * x.abs().max(1.0)).floor()
}

pub fn expurgate(
    profile: &CodeErrorProfile,
    epsilon: f64,
    subset: SubsetSpec,
) -> Result<ExpurgationResult> {
    if !(0.0..1.0).contains(&epsilon) {
        return invalid(format!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    let n_src = profile.sources();
    if subset.is_empty() || !subset.fits(n_src) {
        return invalid(format!("subset {:?} does not fit {n_src} sources", subset.labels()));
    }
    let average = profile.average_error();
    if average > epsilon + AVERAGE_TOLERANCE {
        return Err(Error::Precondition(format!(
            "average error {average} exceeds epsilon {epsilon}"
        )));
    }
    let ratio = (1.0 - epsilon) / (1.0 + epsilon);
    let members: Vec<usize> = subset.members().collect();
    let prod_t = product_over(&profile.message_sizes, &members);
    let size_bound = ratio / 2.0 * prod_t;
    if floor_tol(ratio * prod_t) < size_bound {
        return Err(Error::Precondition(format!(
            "floor({ratio} * {prod_t}) is below {size_bound}"
        )));
    }

    let low_error_count = floor_tol(ratio * profile.tuple_count() as f64) as usize;
    let mut order: Vec<usize> = (0..profile.tuple_count()).collect();
    order.sort_unstable_by(|&a, &b| {
        profile.errors[a]
            .total_cmp(&profile.errors[b])
            .then(a.cmp(&b))
    });
    let low: &[usize] = &order[..low_error_count];

    let complement: Vec<usize> = subset.complement(n_src).members().collect();
    let tail_of = |idx: usize| -> Vec<u64> {
        let t = profile.tuple(idx);
        complement.iter().map(|&i| t[i]).collect()
    };
    let mut counts: std::collections::BTreeMap<Vec<u64>, usize> = Default::default();
    for &idx in low {
        *counts.entry(tail_of(idx)).or_default() += 1;
    }
    // BTreeMap iterates tails in lexicographic order, so the first maximum wins
    let fixed_tail = counts
        .iter()
        .fold(None::<(&Vec<u64>, usize)>, |best, (tail, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((tail, c)),
        })
        .map(|(t, _)| t.clone())
        .ok_or_else(|| Error::Invariant("low-error set is empty".into()))?;

    let mut chosen: Vec<usize> = low
        .iter()
        .copied()
        .filter(|&idx| tail_of(idx) == fixed_tail)
        .collect();
    chosen.sort_unstable();
    let support: Vec<Vec<u64>> = chosen.iter().map(|&i| profile.tuple(i)).collect();
    let support_projection = support
        .iter()
        .map(|t| members.iter().map(|&i| t[i]).collect())
        .collect();
    let max_error = chosen
        .iter()
        .map(|&i| profile.errors[i])
        .max_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
        .unwrap_or(0.0);

    let result = ExpurgationResult {
        subset,
        support,
        support_projection,
        fixed_tail,
        max_error,
        error_cap: (1.0 + epsilon) / 2.0,
        low_error_count: low_error_count as u64,
        size_bound,
        mass_bound: 2.0 / ratio / prod_t,
    };
    let report = verify(profile, &result);
    if !report.all_hold() {
        return Err(Error::Invariant(format!("expurgation result fails {report:?}")));
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpurgationCheck {
    pub shared_tail: bool,
    pub projection_injective: bool,
    pub max_error_within_cap: bool,
    pub size_bound_holds: bool,
    pub mass_bound_holds: bool,
}

impl ExpurgationCheck {
    pub fn all_hold(&self) -> bool {
        self.shared_tail
            && self.projection_injective
            && self.max_error_within_cap
            && self.size_bound_holds
            && self.mass_bound_holds
    }
}

/// Re-checks the guarantees directly from the profile and the returned support.
pub fn verify(profile: &CodeErrorProfile, result: &ExpurgationResult) -> ExpurgationCheck {
    let n_src = profile.sources();
    let complement: Vec<usize> = result.subset.complement(n_src).members().collect();
    let members: Vec<usize> = result.subset.members().collect();
    let shared_tail = result.support.iter().all(|t| {
        complement
            .iter()
            .map(|&i| t[i])
            .eq(result.fixed_tail.iter().copied())
    });
    let mut projected: Vec<Vec<u64>> = result
        .support
        .iter()
        .map(|t| members.iter().map(|&i| t[i]).collect())
        .collect();
    projected.sort();
    projected.dedup();
    let projection_injective = projected.len() == result.support.len();
    let max_error_within_cap = result
        .support
        .iter()
        .all(|t| profile.error(t) <= result.error_cap + AVERAGE_TOLERANCE);
    let size = result.support.len() as f64;
    ExpurgationCheck {
        shared_tail,
        projection_injective,
        max_error_within_cap,
        size_bound_holds: size >= result.size_bound * (1.0 - 1e-12),
        mass_bound_holds: !projected.is_empty()
            && 1.0 / projected.len() as f64 <= result.mass_bound * (1.0 + 1e-12),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full(n: usize) -> SubsetSpec {
        SubsetSpec::full(n)
    }

    #[test]
    fn two_by_two_example() {
        let p = CodeErrorProfile::new(vec![2, 2], vec![0.1, 0.2, 0.9, 0.95]).unwrap();
        let r = expurgate(&p, 0.6, full(2)).unwrap();
        // ⌊(0.4/1.6)·4⌋ = 1: only the smallest-error tuple survives
        assert_eq!(r.low_error_count, 1);
        assert_eq!(r.support, vec![vec![0, 0]]);
        assert!(r.max_error <= 0.8);
        assert_eq!(r.support_projection.len(), 1);
        assert!(r.fixed_tail.is_empty());
    }

    #[test]
    fn zero_error_code() {
        let p = CodeErrorProfile::new(vec![3, 2], vec![0.0; 6]).unwrap();
        let r = expurgate(&p, 0.0, SubsetSpec::from_labels(&[1], 2).unwrap()).unwrap();
        assert_eq!(r.max_error, 0.0);
        assert_eq!(r.fixed_tail, vec![0]);
        assert_eq!(r.support, vec![vec![0, 0], vec![1, 0], vec![2, 0]]);
        let r = expurgate(&p, 0.0, full(2)).unwrap();
        assert_eq!(r.size(), 6);
    }

    #[test]
    fn average_gate() {
        let p = CodeErrorProfile::new(vec![2], vec![0.7, 0.7]).unwrap();
        assert!(matches!(expurgate(&p, 0.5, full(1)), Err(Error::Precondition(_))));
    }

    #[test]
    fn floor_precondition_gate() {
        // ⌊(0.1/1.9)·2⌋ = 0 < 0.0526
        let p = CodeErrorProfile::new(vec![2], vec![0.9, 0.0]).unwrap();
        assert!(matches!(expurgate(&p, 0.9, full(1)), Err(Error::Precondition(_))));
    }

    #[test]
    fn tail_ties_pick_smallest() {
        // every tuple has the same error: each tail of source 1 gets an equal share
        let p = CodeErrorProfile::new(vec![2, 3], vec![0.0; 6]).unwrap();
        let r = expurgate(&p, 0.0, SubsetSpec::from_labels(&[2], 2).unwrap()).unwrap();
        assert_eq!(r.fixed_tail, vec![0]);
        assert_eq!(r.support_projection, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn shape_errors() {
        assert!(CodeErrorProfile::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(CodeErrorProfile::new(vec![2], vec![0.0, 1.5]).is_err());
        assert!(CodeErrorProfile::new(vec![0], vec![]).is_err());
        let p = CodeErrorProfile::new(vec![2], vec![0.0; 2]).unwrap();
        assert!(expurgate(&p, 1.0, full(1)).is_err());
        assert!(expurgate(&p, 0.0, full(2)).is_err());
    }

    #[test]
    fn tuple_indexing_roundtrip() {
        let p = CodeErrorProfile::new(vec![3, 4, 2], vec![0.0; 24]).unwrap();
        for i in 0..24 {
            assert_eq!(p.index(&p.tuple(i)), i);
        }
        assert_eq!(p.tuple(1), vec![0, 0, 1]);
        assert_eq!(p.tuple(2), vec![0, 1, 0]);
    }

    fn profile_and_eps() -> impl Strategy<Value = (CodeErrorProfile, f64, u32)> {
        (proptest::collection::vec(1u64..=5, 1..=3), 0.0f64..0.95)
            .prop_flat_map(|(sizes, eps)| {
                let total: u64 = sizes.iter().product();
                let n = sizes.len();
                (
                    Just(sizes),
                    proptest::collection::vec(0.0f64..=1.0, total as usize),
                    Just(eps),
                    1u32..(1 << n),
                )
            })
            .prop_map(|(sizes, raw, eps, mask)| {
                // rescale so the average is at most eps
                let avg = raw.iter().sum::<f64>() / raw.len() as f64;
                let scale = if avg > eps { eps / avg } else { 1.0 };
                let errs = raw.iter().map(|e| (e * scale).min(1.0)).collect();
                (CodeErrorProfile::new(sizes, errs).unwrap(), eps, mask)
            })
    }

    proptest! {
        #[test]
        fn markov_guarantee((p, eps, _m) in profile_and_eps()) {
            let mut e = p.errors().to_vec();
            e.sort_by(f64::total_cmp);
            let k = floor_tol((1.0 - eps) / (1.0 + eps) * e.len() as f64) as usize;
            if k > 0 {
                prop_assert!(e[k - 1] <= (1.0 + eps) / 2.0 + 1e-12);
            }
        }

        #[test]
        fn guarantees_or_precondition((p, eps, mask) in profile_and_eps()) {
            let t = SubsetSpec::from_mask(mask);
            let ratio = (1.0 - eps) / (1.0 + eps);
            let prod_t: f64 = t.members().map(|i| p.message_sizes()[i] as f64).product();
            match expurgate(&p, eps, t) {
                Ok(r) => {
                    prop_assert!(verify(&p, &r).all_hold());
                    prop_assert!(r.size() as f64 >= floor_tol(ratio * prod_t));
                    // determinism
                    prop_assert_eq!(expurgate(&p, eps, t).unwrap(), r);
                }
                Err(Error::Precondition(_)) => {
                    prop_assert!(floor_tol(ratio * prod_t) < ratio / 2.0 * prod_t);
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}

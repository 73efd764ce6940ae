//! Wringing: condition a joint law on a few coordinates so that every
//! remaining per-letter marginal is close to a reference law.
//!
//! Given `p ≤ (1+c)·u` on `𝒳ⁿ`, the search repeatedly fixes a coordinate
//! `k` to a symbol `x` whenever `p(x_k | F) > max((1+δ)·u(x_k | F), λ)`.
//! Each fix raises `P(F)/U(F)` by more than `1+δ` while `P(F)/U(F)` stays
//! at most `1+c`, so at most `c/δ` fixes happen, and each keeps at least a
//! `λ` share of the current event.

use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::quantizer::{alphabet_size_bound, code_quantizer_spec, QuantizerSpec};
use crate::regions::SubsetSpec;

/// Absolute slack on every probability comparison.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// A distribution on `𝒳ⁿ` stored by its positive-mass sequences.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(from = "Vec<(Vec<u32>, f64)>")]
pub struct SparsePmf(BTreeMap<Vec<u32>, f64>);

impl From<Vec<(Vec<u32>, f64)>> for SparsePmf {
    fn from(atoms: Vec<(Vec<u32>, f64)>) -> Self {
        let mut map = BTreeMap::new();
        for (seq, mass) in atoms {
            *map.entry(seq).or_insert(0.0) += mass;
        }
        Self(map)
    }
}

impl Serialize for SparsePmf {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for atom in &self.0 {
            seq.serialize_element(&atom)?;
        }
        seq.end()
    }
}

impl SparsePmf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, seq: Vec<u32>, mass: f64) {
        *self.0.entry(seq).or_insert(0.0) += mass;
    }

    pub fn mass(&self, seq: &[u32]) -> f64 {
        self.0.get(seq).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.0.iter().map(|(s, &m)| (s, m))
    }

    /// Atoms consistent with `seq[k] = x` for every `(k, x)` in `event`.
    fn restricted<'a>(
        &'a self,
        event: &'a [(usize, u32)],
    ) -> impl Iterator<Item = (&'a Vec<u32>, f64)> + 'a {
        self.iter()
            .filter(move |(seq, _)| event.iter().all(|&(k, x)| seq[k] == x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductApproxInstance {
    n: usize,
    alphabet_size: u32,
    p: SparsePmf,
    u: SparsePmf,
    c: f64,
    lambda: f64,
    delta: f64,
}

impl ProductApproxInstance {
    pub fn new(
        n: usize,
        alphabet_size: u32,
        p: SparsePmf,
        u: SparsePmf,
        c: f64,
        lambda: f64,
        delta: f64,
    ) -> Result<Self> {
        if n == 0 || alphabet_size == 0 {
            return invalid("length and alphabet size must be positive");
        }
        if !(c.is_finite() && c > 0.0) {
            return invalid(format!("c must be positive, got {c}"));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return invalid(format!("lambda must lie in (0, 1), got {lambda}"));
        }
        if !(delta > 0.0 && delta < c) {
            return invalid(format!("delta must lie in (0, c) = (0, {c}), got {delta}"));
        }
        for (name, d) in [("p", &p), ("u", &u)] {
            for (seq, m) in d.iter() {
                if seq.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: seq.len(),
                    });
                }
                if let Some(x) = seq.iter().find(|&&x| x >= alphabet_size) {
                    return invalid(format!("symbol {x} of {name} outside alphabet of size {alphabet_size}"));
                }
                if !(m.is_finite() && m >= 0.0) {
                    return Err(Error::NotADistribution(format!("{name} has mass {m}")));
                }
            }
            let total = d.total();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::NotADistribution(format!("{name} sums to {total}")));
            }
        }
        for (seq, m) in p.iter() {
            let bound = (1.0 + c) * u.mass(seq);
            if m > bound * (1.0 + PROBABILITY_TOLERANCE) + PROBABILITY_TOLERANCE * 1e-3 {
                return Err(Error::Domination(format!(
                    "p({seq:?}) = {m} exceeds (1+c)·u = {bound}"
                )));
            }
        }
        Ok(Self {
            n,
            alphabet_size,
            p,
            u,
            c,
            lambda,
            delta,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn p(&self) -> &SparsePmf {
        &self.p
    }

    pub fn u(&self) -> &SparsePmf {
        &self.u
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `⌊c/δ⌋`, the most fixes a valid run can make.
    pub fn step_limit(&self) -> usize {
        (self.c / self.delta).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WringingStep {
    pub coordinate: usize,
    pub symbol: u32,
    /// `p(x_k | F)` and `u(x_k | F)` just before the fix.
    pub p_conditional: f64,
    pub u_conditional: f64,
    /// `P(F)/U(F)` before and after the fix.
    pub ratio_before: f64,
    pub ratio_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WringingResult {
    pub steps: Vec<WringingStep>,
    /// Fixed coordinates (0-based) in the order chosen.
    pub coordinates: Vec<usize>,
    pub values: Vec<u32>,
    pub event_probability: f64,
    pub event_reference_probability: f64,
    /// `p(· | F)` on its support.
    pub conditioned: SparsePmf,
}

impl WringingResult {
    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    pub fn event(&self) -> Vec<(usize, u32)> {
        self.coordinates
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .collect()
    }
}

/// Per-coordinate marginals of `d` restricted to `event`, unnormalized.
fn marginals(d: &SparsePmf, n: usize, event: &[(usize, u32)]) -> (f64, Vec<BTreeMap<u32, f64>>) {
    let mut total = 0.0;
    let mut out = vec![BTreeMap::new(); n];
    for (seq, m) in d.restricted(event) {
        total += m;
        for (k, &x) in seq.iter().enumerate() {
            *out[k].entry(x).or_insert(0.0) += m;
        }
    }
    (total, out)
}

pub fn wring(inst: &ProductApproxInstance) -> Result<WringingResult> {
    let (n, delta, lambda) = (inst.n, inst.delta, inst.lambda);
    let limit = inst.step_limit();
    let mut event: Vec<(usize, u32)> = Vec::new();
    let mut steps = Vec::new();
    loop {
        let (pf, pm) = marginals(&inst.p, n, &event);
        let (uf, um) = marginals(&inst.u, n, &event);
        if uf <= 0.0 {
            return Err(Error::Domination(format!(
                "event {event:?} has p-mass {pf} but no reference mass"
            )));
        }
        let fixed: BTreeSet<usize> = event.iter().map(|e| e.0).collect();
        let mut violation = None;
        'search: for k in (0..n).filter(|k| !fixed.contains(k)) {
            for (&x, &pmass) in &pm[k] {
                let pc = pmass / pf;
                let uc = um[k].get(&x).copied().unwrap_or(0.0) / uf;
                if pc > ((1.0 + delta) * uc).max(lambda) + PROBABILITY_TOLERANCE {
                    violation = Some((k, x, pc, uc));
                    break 'search;
                }
            }
        }
        let Some((k, x, pc, uc)) = violation else {
            let conditioned = SparsePmf(
                inst.p
                    .restricted(&event)
                    .map(|(s, m)| (s.clone(), m / pf))
                    .collect(),
            );
            let (coordinates, values) = event.iter().copied().unzip();
            return Ok(WringingResult {
                steps,
                coordinates,
                values,
                event_probability: pf,
                event_reference_probability: uf,
                conditioned,
            });
        };
        if uc <= 0.0 {
            return Err(Error::Domination(format!(
                "symbol {x} at coordinate {k} has p-mass {pc} but no reference mass"
            )));
        }
        if steps.len() >= limit {
            return Err(Error::StepLimit { limit });
        }
        let ratio_before = pf / uf;
        steps.push(WringingStep {
            coordinate: k,
            symbol: x,
            p_conditional: pc,
            u_conditional: uc,
            ratio_before,
            ratio_after: ratio_before * pc / uc,
        });
        event.push((k, x));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WringingCheck {
    /// (I) `ℓ ≤ c/δ`.
    pub step_count: bool,
    /// (II) `P(F) ≥ λ^ℓ`.
    pub event_probability: bool,
    /// (III) for every free coordinate and symbol.
    pub per_letter: bool,
    /// Each step multiplied `P(F)/U(F)` by more than `1+δ`, ending at most `1+c`.
    pub potential: bool,
    /// Largest `p(x_k|F) − max((1+δ)u(x_k|F), λ)` over free coordinates.
    pub worst_excess: f64,
}

impl WringingCheck {
    pub fn all_hold(&self) -> bool {
        self.step_count && self.event_probability && self.per_letter && self.potential
    }
}

/// Recomputes every guarantee from the instance and the returned event alone.
pub fn verify(inst: &ProductApproxInstance, result: &WringingResult) -> WringingCheck {
    let ell = result.coordinates.len();
    let matches = |seq: &[u32]| {
        result
            .coordinates
            .iter()
            .zip(&result.values)
            .all(|(&k, &x)| seq[k] == x)
    };
    let pf: f64 = inst.p.iter().filter(|(s, _)| matches(s)).map(|(_, m)| m).sum();
    let uf: f64 = inst.u.iter().filter(|(s, _)| matches(s)).map(|(_, m)| m).sum();
    let mut worst_excess = f64::NEG_INFINITY;
    if pf > 0.0 && uf > 0.0 {
        for k in (0..inst.n).filter(|k| !result.coordinates.contains(k)) {
            for x in 0..inst.alphabet_size {
                let pc: f64 = inst
                    .p
                    .iter()
                    .filter(|(s, _)| matches(s) && s[k] == x)
                    .map(|(_, m)| m)
                    .sum::<f64>()
                    / pf;
                let uc: f64 = inst
                    .u
                    .iter()
                    .filter(|(s, _)| matches(s) && s[k] == x)
                    .map(|(_, m)| m)
                    .sum::<f64>()
                    / uf;
                worst_excess = worst_excess.max(pc - ((1.0 + inst.delta) * uc).max(inst.lambda));
            }
        }
    }
    let potential = result
        .steps
        .iter()
        .all(|s| s.ratio_after > (1.0 + inst.delta) * s.ratio_before * (1.0 - 1e-12))
        && (pf / uf) <= (1.0 + inst.c) * (1.0 + 1e-9);
    WringingCheck {
        step_count: ell as f64 <= inst.c / inst.delta,
        event_probability: pf > 0.0 && pf >= inst.lambda.powi(ell as i32) * (1.0 - 1e-12),
        per_letter: pf > 0.0 && uf > 0.0 && worst_excess <= PROBABILITY_TOLERANCE,
        potential,
        worst_excess: if worst_excess.is_finite() { worst_excess } else { 0.0 },
    }
}

/// Runs `wring` and rejects any result the independent check does not accept.
pub fn wring_verified(inst: &ProductApproxInstance) -> Result<(WringingResult, WringingCheck)> {
    let result = wring(inst)?;
    let check = verify(inst, &result);
    if !check.all_hold() {
        return Err(Error::Invariant(format!("wringing result fails {check:?}")));
    }
    Ok((result, check))
}

/// Per-letter symbol of the quantized code: one grid index per source in the subset.
pub type QuantizedLetter = Vec<i64>;

/// Codebooks are indexed `[source][message][letter]`.
#[derive(Debug, Clone, Copy)]
pub struct CodeWringingInput<'a> {
    pub codebooks: &'a [Vec<Vec<f64>>],
    pub powers: &'a [f64],
    /// Full message tuples (0-based) of the starting subcode.
    pub support: &'a [Vec<u64>],
    /// Probabilities of the support tuples; uniform when absent.
    pub weights: Option<&'a [f64]>,
    pub subset: SubsetSpec,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeWringingParameters {
    pub c: f64,
    pub lambda: f64,
    pub delta: f64,
    pub quantizers: Vec<QuantizerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeWringingCertificate {
    pub subcode_size: usize,
    /// `log₂` of `n^{−4|T|ℓ}·((1−ε)/(2(1+ε)))·Π_{i∈T} M_i`.
    pub log2_size_bound: f64,
    /// Same with `ℓ` replaced by its worst case `((1+3ε)/(1−ε))·√(n/log₂n)`.
    pub log2_size_bound_worst_case: f64,
    pub size_bound_holds: bool,
    pub worst_case_size_bound_holds: bool,
    /// Largest `p_k(x̂) − max((1+δ)·Π_i u_{i,k}(x̂_i), λ)` over all letters and symbols.
    pub worst_letter_excess: f64,
    pub letter_domination_holds: bool,
    pub reference_energy: f64,
    pub energy_budget: f64,
    pub energy_holds: bool,
    pub alphabet_size: f64,
    pub alphabet_bound: f64,
    pub alphabet_holds: bool,
    pub wringing: WringingCheck,
}

impl CodeWringingCertificate {
    pub fn all_hold(&self) -> bool {
        self.size_bound_holds
            && self.worst_case_size_bound_holds
            && self.letter_domination_holds
            && self.energy_holds
            && self.alphabet_holds
            && self.wringing.all_hold()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeWringingResult {
    pub parameters: CodeWringingParameters,
    /// Interned per-letter symbols; symbol id `j` is `letters[j]`.
    pub letters: Vec<QuantizedLetter>,
    pub wringing: WringingResult,
    /// Message tuples of the subcode, a subset of the input support.
    pub subcode: Vec<Vec<u64>>,
    /// `reference[i][k]` maps grid index to probability for the `i`-th member of the subset at letter `k`.
    pub reference: Vec<Vec<BTreeMap<i64, f64>>>,
    pub certificate: CodeWringingCertificate,
}

fn check_code(input: &CodeWringingInput) -> Result<usize> {
    let CodeWringingInput {
        codebooks,
        powers,
        support,
        weights,
        subset,
        epsilon,
    } = *input;
    if codebooks.len() != powers.len() {
        return Err(Error::DimensionMismatch {
            expected: codebooks.len(),
            got: powers.len(),
        });
    }
    if subset.is_empty() || !subset.fits(codebooks.len()) {
        return invalid("subset does not fit the codebooks");
    }
    if !(0.0..1.0).contains(&epsilon) {
        return invalid(format!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    let n = codebooks
        .iter()
        .flat_map(|cb| cb.first())
        .map(Vec::len)
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty codebook".into()))?;
    if n < 2 {
        return invalid("blocklength must be at least 2");
    }
    for (i, (cb, &p)) in codebooks.iter().zip(powers).enumerate() {
        if cb.is_empty() {
            return invalid(format!("codebook {} is empty", i + 1));
        }
        for (w, x) in cb.iter().enumerate() {
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
            let energy: f64 = x.iter().map(|v| v * v).sum();
            let limit = n as f64 * p;
            if energy > limit * (1.0 + 1e-12) {
                return Err(Error::PowerViolation {
                    source_index: i + 1,
                    message: w,
                    energy,
                    limit,
                });
            }
        }
    }
    if support.is_empty() {
        return invalid("support is empty");
    }
    for t in support {
        if t.len() != codebooks.len() {
            return Err(Error::DimensionMismatch {
                expected: codebooks.len(),
                got: t.len(),
            });
        }
        if t.iter().zip(codebooks).any(|(&w, cb)| w as usize >= cb.len()) {
            return invalid(format!("message tuple {t:?} outside the codebooks"));
        }
    }
    if let Some(w) = weights {
        if w.len() != support.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: w.len(),
            });
        }
    }
    Ok(n)
}

/// Quantizes the codebooks, wrings the per-letter joint of quantized symbols
/// against the uniform-codebook product reference, and certifies the result.
pub fn quantized_code_wringing(input: &CodeWringingInput) -> Result<CodeWringingResult> {
    let n = check_code(input)?;
    let CodeWringingInput {
        codebooks,
        powers,
        support,
        weights,
        subset,
        epsilon,
    } = *input;
    let members: Vec<usize> = subset.members().collect();
    let t = members.len();
    let nf = n as f64;

    let masses: Vec<f64> = match weights {
        Some(w) => {
            let total: f64 = w.iter().sum();
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::NotADistribution("support weights".into()));
            }
            w.to_vec()
        }
        None => vec![1.0 / support.len() as f64; support.len()],
    };

    let ratio = (1.0 - epsilon) / (1.0 + epsilon);
    let prod_t: f64 = members.iter().map(|&i| codebooks[i].len() as f64).product();
    let mut projected: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for (tuple, &m) in support.iter().zip(&masses) {
        let key: Vec<u64> = members.iter().map(|&i| tuple[i]).collect();
        *projected.entry(key).or_insert(0.0) += m;
    }
    if projected.len() != support.len() {
        return Err(Error::Precondition(
            "support tuples must differ within the subset".into(),
        ));
    }
    if (support.len() as f64) < ratio / 2.0 * prod_t * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "support size {} below {}",
            support.len(),
            ratio / 2.0 * prod_t
        )));
    }
    let mass_cap = 2.0 / ratio / prod_t;
    if let Some(m) = projected.values().find(|&&m| m > mass_cap * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "tuple probability {m} exceeds {mass_cap}"
        )));
    }

    let quantizers = members
        .iter()
        .map(|&i| code_quantizer_spec(n, powers[i]))
        .collect::<Result<Vec<_>>>()?;
    // quantized[j][w][k]: grid index of letter k of codeword w of the j-th member
    let quantized: Vec<Vec<Vec<i64>>> = members
        .iter()
        .zip(&quantizers)
        .map(|(&i, q)| {
            codebooks[i]
                .iter()
                .map(|x| Ok(q.quantize_vec(x)?.into_iter().map(|g| g.0).collect()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let letter_of = |ws: &[usize], k: usize| -> QuantizedLetter {
        ws.iter().enumerate().map(|(j, &w)| quantized[j][w][k]).collect()
    };
    let support_ws: Vec<Vec<usize>> = support
        .iter()
        .map(|tuple| members.iter().map(|&i| tuple[i] as usize).collect())
        .collect();
    let sizes: Vec<usize> = members.iter().map(|&i| codebooks[i].len()).collect();
    let total_combos: usize = sizes.iter().product();
    let combo = |mut idx: usize| -> Vec<usize> {
        let mut ws = vec![0; t];
        for j in (0..t).rev() {
            ws[j] = idx % sizes[j];
            idx /= sizes[j];
        }
        ws
    };

    let mut alphabet: BTreeSet<QuantizedLetter> = BTreeSet::new();
    for ws in support_ws.iter().cloned().chain((0..total_combos).map(combo)) {
        for k in 0..n {
            alphabet.insert(letter_of(&ws, k));
        }
    }
    let letters: Vec<QuantizedLetter> = alphabet.into_iter().collect();
    let ids: BTreeMap<&QuantizedLetter, u32> =
        letters.iter().enumerate().map(|(j, l)| (l, j as u32)).collect();
    let encode = |ws: &[usize]| -> Vec<u32> { (0..n).map(|k| ids[&letter_of(ws, k)]).collect() };

    let mut p = SparsePmf::new();
    for (ws, &m) in support_ws.iter().zip(&masses) {
        if m > 0.0 {
            p.add(encode(ws), m);
        }
    }
    let mut u = SparsePmf::new();
    for idx in 0..total_combos {
        u.add(encode(&combo(idx)), 1.0 / prod_t);
    }

    let c = (1.0 + 3.0 * epsilon) / (1.0 - epsilon);
    let lambda = nf.powi(-4 * t as i32);
    let delta = (nf.log2() / nf).sqrt();
    let inst = ProductApproxInstance::new(n, letters.len() as u32, p, u, c, lambda, delta)
        .map_err(|e| match e {
            Error::Domination(m) => Error::Precondition(format!("quantized code: {m}")),
            other => other,
        })?;
    let (wringing, wringing_check) = wring_verified(&inst)?;
    let event = wringing.event();

    let keep = |ws: &[usize]| event.iter().all(|&(k, x)| letters[x as usize] == letter_of(ws, k));
    let kept: Vec<usize> = (0..support.len()).filter(|&j| keep(&support_ws[j])).collect();
    if kept.is_empty() {
        return Err(Error::Invariant("wringing left an empty subcode".into()));
    }
    let subcode: Vec<Vec<u64>> = kept.iter().map(|&j| support[j].clone()).collect();
    let kept_mass: f64 = kept.iter().map(|&j| masses[j]).sum();

    // per-source conditional reference: codewords of source j that agree with the fixed letters
    let mut reference: Vec<Vec<BTreeMap<i64, f64>>> = Vec::with_capacity(t);
    for j in 0..t {
        let agree: Vec<usize> = (0..sizes[j])
            .filter(|&w| event.iter().all(|&(k, x)| letters[x as usize][j] == quantized[j][w][k]))
            .collect();
        if agree.is_empty() {
            return Err(Error::Invariant(format!("no codeword of member {j} matches the event")));
        }
        let share = 1.0 / agree.len() as f64;
        let mut per_letter = vec![BTreeMap::new(); n];
        for &w in &agree {
            for (k, slot) in per_letter.iter_mut().enumerate() {
                *slot.entry(quantized[j][w][k]).or_insert(0.0) += share;
            }
        }
        reference.push(per_letter);
    }

    let mut worst_letter_excess = f64::NEG_INFINITY;
    for k in 0..n {
        let mut pk: BTreeMap<QuantizedLetter, f64> = BTreeMap::new();
        for &j in &kept {
            *pk.entry(letter_of(&support_ws[j], k)).or_insert(0.0) += masses[j] / kept_mass;
        }
        for (letter, pm) in pk {
            let prod: f64 = letter
                .iter()
                .enumerate()
                .map(|(j, g)| reference[j][k].get(g).copied().unwrap_or(0.0))
                .product();
            worst_letter_excess = worst_letter_excess.max(pm - ((1.0 + delta) * prod).max(lambda));
        }
    }

    let reference_energy: f64 = reference
        .iter()
        .zip(&quantizers)
        .map(|(per_letter, q)| {
            per_letter
                .iter()
                .flat_map(|d| d.iter().map(|(&g, &m)| m * q.value(crate::quantizer::GridPoint(g)).powi(2)))
                .sum::<f64>()
        })
        .sum();
    let energy_budget: f64 = members.iter().map(|&i| nf * powers[i]).sum();

    let ell = wringing.len() as f64;
    let base = (ratio / 2.0).log2() + prod_t.log2();
    let log2_size_bound = -4.0 * t as f64 * ell * nf.log2() + base;
    let log2_size_bound_worst_case = -4.0 * t as f64 * c * (nf / nf.log2()).sqrt() * nf.log2() + base;
    let log2_size = (subcode.len() as f64).log2();
    let alphabet_size: f64 = quantizers.iter().map(|q| q.cardinality() as f64).product();
    let alphabet_bound = alphabet_size_bound(n, &members.iter().map(|&i| powers[i]).collect::<Vec<_>>());

    let certificate = CodeWringingCertificate {
        subcode_size: subcode.len(),
        log2_size_bound,
        log2_size_bound_worst_case,
        size_bound_holds: log2_size >= log2_size_bound - 1e-9,
        worst_case_size_bound_holds: log2_size >= log2_size_bound_worst_case - 1e-9,
        worst_letter_excess,
        letter_domination_holds: worst_letter_excess <= PROBABILITY_TOLERANCE,
        reference_energy,
        energy_budget,
        energy_holds: reference_energy <= energy_budget * (1.0 + 1e-12),
        alphabet_size,
        alphabet_bound,
        alphabet_holds: alphabet_size <= alphabet_bound,
        wringing: wringing_check,
    };
    Ok(CodeWringingResult {
        parameters: CodeWringingParameters {
            c,
            lambda,
            delta,
            quantizers,
        },
        letters,
        wringing,
        subcode,
        reference,
        certificate,
    })
}

//! Data model for partially specified event systems.
//!
//! An [`EventSystem`] stores the probability of every intersection of up to
//! `depth` events; a [`JointDistribution`] is the fully specified ground
//! truth over all 2^n outcome atoms. Generators cover the product-form case
//! and seeded random joints.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kahan::{compensated_sum, CompensatedSum};
use crate::subsets::{indices_of, k_subsets, mask_of};

/// Atom-count ceiling: joints hold 2^n masses.
pub const MAX_JOINT_EVENTS: usize = 20;

/// Mask-width ceiling for intersection tables.
pub const MAX_EVENTS: usize = 63;

/// Monotonicity slack: a superset may exceed its subset by at most this
/// before it is reported (inputs may carry rounded external values).
pub const MONOTONICITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EventModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid subset {subset:?}: {reason}")]
    BadSubset { subset: Vec<usize>, reason: String },
    #[error("system failed validation: {0}")]
    Invalid(String),
}

/// One validation finding; violations are data, not errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingSubset { subset: Vec<usize> },
    OutOfRange { subset: Vec<usize>, p: f64 },
    Monotonicity { subset: Vec<usize>, superset: Vec<usize>, gap: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::MissingSubset { subset } => {
                write!(f, "missing intersection entry for {subset:?}")
            }
            Violation::OutOfRange { subset, p } => {
                write!(f, "probability {p} for {subset:?} outside [0,1]")
            }
            Violation::Monotonicity { subset, superset, gap } => write!(
                f,
                "P({superset:?}) exceeds P({subset:?}) by {gap:.3e}"
            ),
        }
    }
}

/// `n` events plus intersection probabilities for every subset of size
/// `1..=depth`, keyed by canonical sorted 1-based index tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSystem {
    n: usize,
    depth: usize,
    table: BTreeMap<u64, f64>,
}

impl EventSystem {
    /// Structural construction: index validity, sizes, duplicates. Semantic
    /// checks (completeness, range, monotonicity) live in [`validate`].
    pub fn new(
        n: usize,
        depth: usize,
        entries: impl IntoIterator<Item = (Vec<usize>, f64)>,
    ) -> Result<Self, EventModelError> {
        if n == 0 || n > MAX_EVENTS {
            return Err(EventModelError::Domain(format!(
                "event count must be in 1..={MAX_EVENTS}, got {n}"
            )));
        }
        if depth == 0 || depth > n {
            return Err(EventModelError::Domain(format!(
                "depth must be in 1..=n ({n}), got {depth}"
            )));
        }
        let mut table = BTreeMap::new();
        for (subset, p) in entries {
            let mask = canonical_mask(&subset, n)?;
            let size = mask.count_ones() as usize;
            if size > depth {
                return Err(EventModelError::BadSubset {
                    subset,
                    reason: format!("size {size} exceeds depth {depth}"),
                });
            }
            if table.insert(mask, p).is_some() {
                return Err(EventModelError::BadSubset {
                    subset,
                    reason: "duplicate subset".into(),
                });
            }
        }
        Ok(Self { n, depth, table })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Intersection probability for a canonical subset mask.
    pub fn prob_mask(&self, mask: u64) -> Option<f64> {
        self.table.get(&mask).copied()
    }

    /// Intersection probability for 1-based indices.
    pub fn prob(&self, indices: &[usize]) -> Result<f64, EventModelError> {
        let mask = canonical_mask(indices, self.n)?;
        self.table.get(&mask).copied().ok_or_else(|| {
            EventModelError::BadSubset {
                subset: indices.to_vec(),
                reason: "not present in table".into(),
            }
        })
    }

    /// Table iteration in ascending mask order (deterministic).
    pub fn entries(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.table.iter().map(|(&m, &p)| (m, p))
    }

    fn is_complete(&self) -> bool {
        let mut per_size = vec![0usize; self.depth + 1];
        for &mask in self.table.keys() {
            per_size[mask.count_ones() as usize] += 1;
        }
        (1..=self.depth).all(|j| {
            per_size[j] as i128 == crate::combinatorics::binom(self.n as i64, j as i64).unwrap_or(-1)
        })
    }
}

fn canonical_mask(indices: &[usize], n: usize) -> Result<u64, EventModelError> {
    if indices.is_empty() {
        return Err(EventModelError::BadSubset {
            subset: vec![],
            reason: "empty subset".into(),
        });
    }
    let mut mask = 0u64;
    for &i in indices {
        if i == 0 || i > n {
            return Err(EventModelError::BadSubset {
                subset: indices.to_vec(),
                reason: format!("index {i} outside 1..={n}"),
            });
        }
        let bit = 1u64 << (i - 1);
        if mask & bit != 0 {
            return Err(EventModelError::BadSubset {
                subset: indices.to_vec(),
                reason: format!("repeated index {i}"),
            });
        }
        mask |= bit;
    }
    Ok(mask)
}

/// Full probability mass over all 2^n outcome atoms; bit `i-1` of the atom
/// index set means event `i` occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    n: usize,
    mass: Vec<f64>,
}

impl JointDistribution {
    /// Strict constructor: masses nonnegative and summing to 1 within 1e-12.
    pub fn new(mass: Vec<f64>) -> Result<Self, EventModelError> {
        let n = atom_count_to_n(mass.len())?;
        for (atom, &m) in mass.iter().enumerate() {
            if !(m >= 0.0) {
                return Err(EventModelError::Domain(format!(
                    "mass of atom {atom} is {m}, must be >= 0"
                )));
            }
        }
        let total = compensated_sum(mass.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(EventModelError::Domain(format!(
                "masses sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(Self { n, mass })
    }

    /// Accepts any nonnegative masses with positive total and rescales.
    pub fn normalized(mass: Vec<f64>) -> Result<Self, EventModelError> {
        let n = atom_count_to_n(mass.len())?;
        for (atom, &m) in mass.iter().enumerate() {
            if !(m >= 0.0) {
                return Err(EventModelError::Domain(format!(
                    "mass of atom {atom} is {m}, must be >= 0"
                )));
            }
        }
        let total = compensated_sum(mass.iter().copied());
        if total <= 0.0 {
            return Err(EventModelError::Domain("total mass must be positive".into()));
        }
        let mass = mass.into_iter().map(|m| m / total).collect();
        Ok(Self { n, mass })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
}

fn atom_count_to_n(len: usize) -> Result<usize, EventModelError> {
    if !len.is_power_of_two() || len < 2 {
        return Err(EventModelError::Domain(format!(
            "atom vector length {len} is not 2^n with n >= 1"
        )));
    }
    let n = len.trailing_zeros() as usize;
    if n > MAX_JOINT_EVENTS {
        return Err(EventModelError::Domain(format!(
            "n={n} exceeds joint distribution cap {MAX_JOINT_EVENTS}"
        )));
    }
    Ok(n)
}

/// Binomial-moment vector `S_1..S_depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct SSums {
    values: Vec<f64>,
}

impl SSums {
    pub fn new(values: Vec<f64>) -> Result<Self, EventModelError> {
        if values.is_empty() {
            return Err(EventModelError::Domain("S vector must be nonempty".into()));
        }
        for (j, &s) in values.iter().enumerate() {
            if !(s >= 0.0) {
                return Err(EventModelError::Domain(format!(
                    "S_{} = {s}, must be >= 0",
                    j + 1
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn depth(&self) -> usize {
        self.values.len()
    }

    /// `S_j`, 1-based; `j` must be within depth.
    pub fn s(&self, j: usize) -> f64 {
        self.values[j - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `S_j` = sum of all size-j intersection probabilities, `j = 1..=depth`.
pub fn s_sums(sys: &EventSystem) -> Result<SSums, EventModelError> {
    if !sys.is_complete() {
        return Err(EventModelError::Invalid(
            "intersection table is incomplete; run validate for details".into(),
        ));
    }
    let mut acc: Vec<CompensatedSum> = vec![CompensatedSum::new(); sys.depth()];
    for (mask, p) in sys.entries() {
        acc[mask.count_ones() as usize - 1].add(p);
    }
    SSums::new(acc.into_iter().map(|a| a.value()).collect())
}

/// Product-form system: the entry for `{i_1,..,i_j}` is the product of the
/// matching alphas.
pub fn from_independent(alphas: &[f64], depth: usize) -> Result<EventSystem, EventModelError> {
    let n = alphas.len();
    if n == 0 || n > MAX_EVENTS {
        return Err(EventModelError::Domain(format!(
            "need 1..={MAX_EVENTS} alphas, got {n}"
        )));
    }
    for (i, &a) in alphas.iter().enumerate() {
        if !(0.0..=1.0).contains(&a) {
            return Err(EventModelError::Domain(format!(
                "alpha_{} = {a} outside [0,1]",
                i + 1
            )));
        }
    }
    if depth == 0 || depth > n {
        return Err(EventModelError::Domain(format!(
            "depth must be in 1..=n ({n}), got {depth}"
        )));
    }
    let mut entries = Vec::new();
    for j in 1..=depth {
        for subset in k_subsets(n, j) {
            let p = subset.iter().map(|&i| alphas[i - 1]).product();
            entries.push((subset, p));
        }
    }
    EventSystem::new(n, depth, entries)
}

/// Product-measure ground truth consistent with [`from_independent`]:
/// atom mass is the product of alpha or (1 - alpha) per bit.
pub fn independent_joint(alphas: &[f64]) -> Result<JointDistribution, EventModelError> {
    let n = alphas.len();
    if n == 0 || n > MAX_JOINT_EVENTS {
        return Err(EventModelError::Domain(format!(
            "need 1..={MAX_JOINT_EVENTS} alphas, got {n}"
        )));
    }
    for (i, &a) in alphas.iter().enumerate() {
        if !(0.0..=1.0).contains(&a) {
            return Err(EventModelError::Domain(format!(
                "alpha_{} = {a} outside [0,1]",
                i + 1
            )));
        }
    }
    let mut mass = vec![0.0; 1 << n];
    for (atom, slot) in mass.iter_mut().enumerate() {
        let mut m = 1.0;
        for (i, &a) in alphas.iter().enumerate() {
            m *= if atom & (1 << i) != 0 { a } else { 1.0 - a };
        }
        *slot = m;
    }
    // products of probabilities sum to exactly 1 only in exact arithmetic
    JointDistribution::normalized(mass)
}

/// Intersection table of a joint: the entry for a subset is the total mass
/// of atoms containing it, computed with a superset-sum (zeta) transform.
pub fn from_joint(joint: &JointDistribution, depth: usize) -> Result<EventSystem, EventModelError> {
    let n = joint.n();
    if depth == 0 || depth > n {
        return Err(EventModelError::Domain(format!(
            "depth must be in 1..=n ({n}), got {depth}"
        )));
    }
    let size = 1usize << n;
    let mut superset_sum = joint.mass().to_vec();
    for bit in 0..n {
        let b = 1usize << bit;
        for mask in 0..size {
            if mask & b == 0 {
                superset_sum[mask] += superset_sum[mask | b];
            }
        }
    }
    let mut entries = Vec::new();
    for j in 1..=depth {
        for subset in k_subsets(n, j) {
            let mask = mask_of(&subset) as usize;
            entries.push((subset, superset_sum[mask].min(1.0)));
        }
    }
    EventSystem::new(n, depth, entries)
}

/// Seeded random joint: 2^n i.i.d. positive uniform draws, normalized.
/// Deterministic in `(n, seed)`.
pub fn random_joint(n: usize, seed: u64) -> Result<JointDistribution, EventModelError> {
    if n == 0 || n > MAX_JOINT_EVENTS {
        return Err(EventModelError::Domain(format!(
            "n must be in 1..={MAX_JOINT_EVENTS}, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mass: Vec<f64> = (0..1usize << n)
        .map(|_| loop {
            let v: f64 = rng.gen();
            if v > 0.0 {
                break v;
            }
        })
        .collect();
    JointDistribution::normalized(mass)
}

/// Semantic validation: completeness, range, superset monotonicity (checked
/// on immediate-subset pairs; transitivity covers the rest). Gaps within
/// [`MONOTONICITY_TOLERANCE`] pass.
pub fn validate(sys: &EventSystem) -> Vec<Violation> {
    let mut violations = Vec::new();
    for j in 1..=sys.depth() {
        for subset in k_subsets(sys.n(), j) {
            let mask = mask_of(&subset);
            match sys.prob_mask(mask) {
                None => violations.push(Violation::MissingSubset { subset }),
                Some(p) => {
                    if !(0.0..=1.0).contains(&p) {
                        violations.push(Violation::OutOfRange { subset, p });
                    }
                }
            }
        }
    }
    // monotonicity on immediate subset pairs
    for (mask, p_super) in sys.entries() {
        if mask.count_ones() < 2 {
            continue;
        }
        for b in 0..64 {
            let bit = 1u64 << b;
            if mask & bit == 0 {
                continue;
            }
            let sub = mask & !bit;
            if let Some(p_sub) = sys.prob_mask(sub) {
                let gap = p_super - p_sub;
                if gap > MONOTONICITY_TOLERANCE {
                    violations.push(Violation::Monotonicity {
                        subset: indices_of(sub),
                        superset: indices_of(mask),
                        gap,
                    });
                }
            }
        }
    }
    violations
}

/// Relabeled system: the result's entry for subset `S` is the input's entry
/// for `{perm(i) : i in S}`. `perm` maps 1-based index `i` to `perm[i-1]`.
pub fn relabel(sys: &EventSystem, perm: &[usize]) -> Result<EventSystem, EventModelError> {
    let n = sys.n();
    if perm.len() != n {
        return Err(EventModelError::Domain(format!(
            "permutation length {} does not match n={n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n + 1];
    for &image in perm {
        if image == 0 || image > n || seen[image] {
            return Err(EventModelError::Domain(format!(
                "not a bijection of 1..={n}: {perm:?}"
            )));
        }
        seen[image] = true;
    }
    // inverse map: event e in the input is event inv[e] in the result
    let mut inv = vec![0usize; n + 1];
    for (i, &image) in perm.iter().enumerate() {
        inv[image] = i + 1;
    }
    let entries = sys.entries().map(|(mask, p)| {
        let relabeled: Vec<usize> = indices_of(mask).iter().map(|&e| inv[e]).collect();
        (relabeled, p)
    });
    let entries: Vec<_> = entries.collect();
    EventSystem::new(n, sys.depth(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_alphas() -> Vec<f64> {
        (1..=6).map(|t| (t as f64 + 18.0) / 100.0).collect()
    }

    #[test]
    fn s_sums_of_example_system() {
        let sys = from_independent(&example_alphas(), 3).unwrap();
        let s = s_sums(&sys).unwrap();
        assert!((s.s(1) - 1.290).abs() < 1e-12);
        assert!((s.s(2) - 0.6925).abs() < 1e-12);
        assert!((s.s(3) - 0.198015).abs() < 1e-12);
    }

    #[test]
    fn s_sums_single_event() {
        let sys = from_independent(&[0.37], 1).unwrap();
        let s = s_sums(&sys).unwrap();
        assert_eq!(s.depth(), 1);
        assert!((s.s(1) - 0.37).abs() < 1e-15);
    }

    #[test]
    fn s_sums_requires_complete_table() {
        let sys = EventSystem::new(2, 1, vec![(vec![1], 0.5)]).unwrap();
        assert!(matches!(s_sums(&sys), Err(EventModelError::Invalid(_))));
    }

    #[test]
    fn from_independent_product_entries() {
        let sys = from_independent(&example_alphas(), 3).unwrap();
        assert!((sys.prob(&[1]).unwrap() - 0.19).abs() < 1e-15);
        assert!((sys.prob(&[1, 2]).unwrap() - 0.19 * 0.20).abs() < 1e-15);
        assert!((sys.prob(&[4, 5, 6]).unwrap() - 0.22 * 0.23 * 0.24).abs() < 1e-15);

        let zero = from_independent(&[0.5, 0.0, 0.3], 3).unwrap();
        assert_eq!(zero.prob(&[1, 2]).unwrap(), 0.0);
        assert_eq!(zero.prob(&[2, 3]).unwrap(), 0.0);
        assert_eq!(zero.prob(&[1, 2, 3]).unwrap(), 0.0);

        let ones = from_independent(&[1.0, 1.0], 2).unwrap();
        assert_eq!(ones.prob(&[1]).unwrap(), 1.0);
        assert_eq!(ones.prob(&[1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn from_independent_rejects_bad_alpha() {
        assert!(from_independent(&[0.5, 1.2], 2).is_err());
        assert!(from_independent(&[0.5, -0.1], 2).is_err());
        assert!(from_independent(&[0.5, 0.5], 3).is_err());
    }

    #[test]
    fn independent_joint_small_cases() {
        let j = independent_joint(&[0.5]).unwrap();
        assert_eq!(j.mass(), &[0.5, 0.5]);

        let j = independent_joint(&[1.0, 0.0]).unwrap();
        assert_eq!(j.mass(), &[0.0, 1.0, 0.0, 0.0]);

        let j = independent_joint(&example_alphas()).unwrap();
        assert!((j.mass()[0] - 0.23366895552).abs() < 1e-12);
    }

    #[test]
    fn from_joint_unit_and_uniform() {
        let n = 4;
        let mut mass = vec![0.0; 1 << n];
        mass[(1 << n) - 1] = 1.0;
        let j = JointDistribution::new(mass).unwrap();
        let sys = from_joint(&j, 3).unwrap();
        for (_, p) in sys.entries() {
            assert_eq!(p, 1.0);
        }

        let j = JointDistribution::new(vec![0.25; 4]).unwrap();
        let sys = from_joint(&j, 2).unwrap();
        assert!((sys.prob(&[1]).unwrap() - 0.5).abs() < 1e-15);
        assert!((sys.prob(&[2]).unwrap() - 0.5).abs() < 1e-15);
        assert!((sys.prob(&[1, 2]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn independent_round_trip() {
        let alphas = example_alphas();
        let direct = from_independent(&alphas, 3).unwrap();
        let via_joint = from_joint(&independent_joint(&alphas).unwrap(), 3).unwrap();
        for (mask, p) in direct.entries() {
            let q = via_joint.prob_mask(mask).unwrap();
            assert!((p - q).abs() < 1e-12, "mask {mask:b}: {p} vs {q}");
        }
    }

    #[test]
    fn random_joint_contracts() {
        let a = random_joint(5, 42).unwrap();
        let b = random_joint(5, 42).unwrap();
        assert_eq!(a.mass(), b.mass());
        let c = random_joint(5, 43).unwrap();
        assert_ne!(a.mass(), c.mass());

        let total = compensated_sum(a.mass().iter().copied());
        assert!((total - 1.0).abs() < 1e-12);

        let small = random_joint(3, 7).unwrap();
        assert!(small.mass().iter().all(|&m| m > 0.0));
    }

    #[test]
    fn random_joint_range() {
        assert!(random_joint(0, 1).is_err());
        assert!(random_joint(MAX_JOINT_EVENTS + 1, 1).is_err());
    }

    #[test]
    fn validate_example_is_clean() {
        let sys = from_independent(&example_alphas(), 3).unwrap();
        assert!(validate(&sys).is_empty());
    }

    #[test]
    fn validate_reports_monotonicity() {
        let sys = EventSystem::new(
            2,
            2,
            vec![(vec![1], 0.4), (vec![2], 0.6), (vec![1, 2], 0.5)],
        )
        .unwrap();
        let violations = validate(&sys);
        assert_eq!(violations.len(), 1);
        assert!(matches!(
            &violations[0],
            Violation::Monotonicity { subset, superset, .. }
                if subset == &vec![1] && superset == &vec![1, 2]
        ));
    }

    #[test]
    fn validate_reports_missing_subset() {
        let sys = EventSystem::new(
            3,
            2,
            vec![
                (vec![1], 0.3),
                (vec![2], 0.3),
                (vec![3], 0.3),
                (vec![1, 2], 0.1),
                (vec![1, 3], 0.1),
            ],
        )
        .unwrap();
        let violations = validate(&sys);
        assert_eq!(violations.len(), 1);
        assert!(matches!(
            &violations[0],
            Violation::MissingSubset { subset } if subset == &vec![2, 3]
        ));
    }

    #[test]
    fn validate_reports_out_of_range() {
        let sys = EventSystem::new(1, 1, vec![(vec![1], 1.5)]).unwrap();
        let violations = validate(&sys);
        assert_eq!(violations.len(), 1);
        assert!(matches!(&violations[0], Violation::OutOfRange { .. }));
    }

    #[test]
    fn relabel_identity_and_bijection_check() {
        let sys = from_independent(&example_alphas(), 3).unwrap();
        let same = relabel(&sys, &[1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(sys, same);

        assert!(relabel(&sys, &[1, 2, 3]).is_err());
        assert!(relabel(&sys, &[1, 1, 3, 4, 5, 6]).is_err());
        assert!(relabel(&sys, &[0, 2, 3, 4, 5, 7]).is_err());
    }

    #[test]
    fn relabel_moves_entries() {
        // result entry for {1} must be input entry for {perm(1)}
        let sys = from_independent(&[0.1, 0.2, 0.3], 2).unwrap();
        let rel = relabel(&sys, &[3, 1, 2]).unwrap();
        assert!((rel.prob(&[1]).unwrap() - 0.3).abs() < 1e-15);
        assert!((rel.prob(&[2]).unwrap() - 0.1).abs() < 1e-15);
        assert!((rel.prob(&[3]).unwrap() - 0.2).abs() < 1e-15);
        assert!((rel.prob(&[1, 2]).unwrap() - 0.3 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn relabel_preserves_s_sums() {
        let sys = from_independent(&example_alphas(), 3).unwrap();
        let s0 = s_sums(&sys).unwrap();
        let rel = relabel(&sys, &[6, 5, 4, 3, 2, 1]).unwrap();
        let s1 = s_sums(&rel).unwrap();
        for j in 1..=3 {
            assert!((s0.s(j) - s1.s(j)).abs() < 1e-12);
        }
        assert!(validate(&rel).is_empty());
    }

    #[test]
    fn joint_constructor_errors() {
        assert!(JointDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(JointDistribution::new(vec![0.5, -0.5, 0.5, 0.5]).is_err());
        assert!(JointDistribution::new(vec![0.3, 0.3, 0.4]).is_err());
        assert!(JointDistribution::new(vec![1.0]).is_err());
        assert!(JointDistribution::normalized(vec![0.0, 0.0]).is_err());
    }
}

//! The four bound families on `P(X >= r)`.
//!
//! Every bound is `partial +/- correction`: the truncated inclusion-exclusion
//! sum plus a nonnegative correction, added for a lower bound (`r+k` odd) and
//! subtracted for an upper bound (`r+k` even). The families differ only in
//! how much of the order-(k+1) information the correction uses:
//!
//! - `classical_bound`: correction 0.
//! - `theorem3_bound`: the optimal coefficient alpha times `S_{k+1}`.
//! - `theorem4_bound`: per-subset best single extensions, labeling-dependent.
//! - `theorem5_bound` (r = 1): the labeling average of the previous family,
//!   computed exactly from order statistics and permutation weights.
//!
//! `mc_permutation_estimate` samples the same labeling average, and
//! `best_numbering_search` optimizes the labeling-dependent family.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{binom, binom_f64, permutation_weight, CombinatoricsError, Rational};
use crate::event_model::{relabel, s_sums, EventModelError, EventSystem, JointDistribution, SSums};
use crate::exact_oracle::{prob_at_least, OracleError};
use crate::kahan::CompensatedSum;
use crate::subsets::{k_subsets, mask_of};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("insufficient depth: need intersection order {needed}, table has {available}")]
    InsufficientDepth { needed: usize, available: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Model(#[from] EventModelError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Classical,
    Theorem3,
    Theorem4,
    Theorem5,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::Classical => "classical",
            Method::Theorem3 => "theorem3",
            Method::Theorem4 => "theorem4",
            Method::Theorem5 => "theorem5",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Upper,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Lower => "lower",
            Direction::Upper => "upper",
        })
    }
}

/// One computed bound. `value` is raw (`partial + correction` for lower,
/// `partial - correction` for upper); `clamped` clips it to [0,1] for
/// presentation. Sandwich checks use the raw value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub method: Method,
    pub r: usize,
    pub k: usize,
    pub direction: Direction,
    pub partial: f64,
    pub correction: f64,
    pub value: f64,
    pub clamped: f64,
    pub labeling_note: Option<String>,
}

fn assemble(
    method: Method,
    r: usize,
    k: usize,
    partial: f64,
    correction: f64,
    labeling_note: Option<String>,
) -> BoundResult {
    let direction = if (r + k) % 2 == 1 {
        Direction::Lower
    } else {
        Direction::Upper
    };
    let value = match direction {
        Direction::Lower => partial + correction,
        Direction::Upper => partial - correction,
    };
    BoundResult {
        method,
        r,
        k,
        direction,
        partial,
        correction,
        value,
        clamped: value.clamp(0.0, 1.0),
        labeling_note,
    }
}

fn ratio_f64(q: &Rational) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn require_rk(r: usize, k: usize) -> Result<(), BoundsError> {
    if r == 0 {
        return Err(BoundsError::Domain("r must be positive".into()));
    }
    if k < r {
        return Err(BoundsError::Domain(format!(
            "requires k >= r, got k={k}, r={r}"
        )));
    }
    Ok(())
}

/// Truncated inclusion-exclusion sum
/// `sum_{j=r}^{k} (-1)^{r+j} C(j-1,r-1) S_j`. May leave [0,1].
pub fn partial_sum(s: &SSums, r: usize, k: usize) -> Result<f64, BoundsError> {
    require_rk(r, k)?;
    if k > s.depth() {
        return Err(BoundsError::InsufficientDepth {
            needed: k,
            available: s.depth(),
        });
    }
    let mut acc = CompensatedSum::new();
    for j in r..=k {
        let term = binom_f64(j as i64 - 1, r as i64 - 1)? * s.s(j);
        acc.add(if (r + j) % 2 == 0 { term } else { -term });
    }
    Ok(acc.value())
}

/// The plain truncation bound: lower for odd `r+k`, upper for even.
pub fn classical_bound(s: &SSums, r: usize, k: usize) -> Result<BoundResult, BoundsError> {
    let partial = partial_sum(s, r, k)?;
    Ok(assemble(Method::Classical, r, k, partial, 0.0, None))
}

/// Lower bound on `E[C(X-i, k+1-i)]` from `S_{k+1}` alone:
/// `C(k+1,i)/C(n,i) * S_{k+1}`.
pub fn lemma3_rhs(s_kplus1: f64, n: usize, k: usize, i: usize) -> Result<f64, BoundsError> {
    if !(1 <= i && i <= k + 1 && k + 1 <= n) {
        return Err(BoundsError::Domain(format!(
            "requires 1 <= i <= k+1 <= n, got n={n}, k={k}, i={i}"
        )));
    }
    let ratio = Rational::new(
        binom(k as i64 + 1, i as i64)?,
        binom(n as i64, i as i64)?,
    );
    Ok(ratio_f64(&ratio) * s_kplus1)
}

/// Optimal-coefficient bound: correction `alpha(n,k,r) * S_{k+1}`, with the
/// coefficient kept rational until this final multiply.
pub fn theorem3_bound(s: &SSums, n: usize, r: usize, k: usize) -> Result<BoundResult, BoundsError> {
    require_rk(r, k)?;
    if k >= n {
        return Err(BoundsError::Domain(format!(
            "requires k < n, got k={k}, n={n}"
        )));
    }
    if k + 1 > s.depth() {
        return Err(BoundsError::InsufficientDepth {
            needed: k + 1,
            available: s.depth(),
        });
    }
    let partial = partial_sum(s, r, k)?;
    let alpha = crate::combinatorics::alpha_coefficient(n as u32, k as u32, r as u32)?;
    let correction = ratio_f64(&alpha) * s.s(k + 1);
    Ok(assemble(Method::Theorem3, r, k, partial, correction, None))
}

fn check_depth_for_correction(sys: &EventSystem, k: usize) -> Result<(), BoundsError> {
    if k + 1 > sys.depth() {
        return Err(BoundsError::InsufficientDepth {
            needed: k + 1,
            available: sys.depth(),
        });
    }
    Ok(())
}

/// Correction of the labeling-dependent bound:
/// `sum_{i=1}^{r} C(k-i,r-i) sum_{bases} max_{tails} P(base u tail)`, where a
/// base is a (k+1-i)-subset, and a tail is an i-subset strictly above the
/// base's largest index. A base with no admissible tail contributes 0.
fn theorem4_correction(sys: &EventSystem, r: usize, k: usize) -> Result<f64, BoundsError> {
    let n = sys.n();
    let mut acc = CompensatedSum::new();
    for i in 1..=r {
        let coeff = binom_f64(k as i64 - i as i64, r as i64 - i as i64)?;
        if coeff == 0.0 {
            continue;
        }
        let base_size = k + 1 - i;
        let mut inner = CompensatedSum::new();
        for base in k_subsets(n, base_size) {
            let top = *base.last().expect("base subsets are nonempty");
            let base_mask = mask_of(&base);
            let mut best = 0.0f64;
            if n - top >= i {
                for tail in k_subsets(n - top, i) {
                    let mut mask = base_mask;
                    for t in tail {
                        mask |= 1u64 << (top + t - 1);
                    }
                    let p = sys.prob_mask(mask).ok_or_else(|| {
                        BoundsError::Model(EventModelError::Invalid(format!(
                            "missing order-{} intersection entry",
                            k + 1
                        )))
                    })?;
                    if p > best {
                        best = p;
                    }
                }
            }
            inner.add(best);
        }
        acc.add(coeff * inner.value());
    }
    Ok(acc.value())
}

/// Best-extension bound under the system's current labeling.
pub fn theorem4_bound(sys: &EventSystem, r: usize, k: usize) -> Result<BoundResult, BoundsError> {
    require_rk(r, k)?;
    check_depth_for_correction(sys, k)?;
    let s = s_sums(sys)?;
    let partial = partial_sum(&s, r, k)?;
    let correction = theorem4_correction(sys, r, k)?;
    Ok(assemble(
        Method::Theorem4,
        r,
        k,
        partial,
        correction,
        Some("natural order".into()),
    ))
}

/// The `n-k` one-event extension probabilities of a fixed k-subset, sorted
/// descending (ties by ascending extension index, for determinism).
#[derive(Debug, Clone, PartialEq)]
pub struct WValues {
    subset: Vec<usize>,
    values: Vec<f64>,
}

impl WValues {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// `values()[s-1]` is the s-th largest extension probability.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn w_values(sys: &EventSystem, subset: &[usize]) -> Result<WValues, BoundsError> {
    let k = subset.len();
    if k == 0 || k >= sys.n() {
        return Err(BoundsError::Domain(format!(
            "subset size must be in 1..n, got {k} with n={}",
            sys.n()
        )));
    }
    check_depth_for_correction(sys, k)?;
    let base_mask = mask_of(subset);
    if base_mask.count_ones() as usize != k {
        return Err(BoundsError::Domain("subset has repeated indices".into()));
    }
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(sys.n() - k);
    for j in 1..=sys.n() {
        let bit = 1u64 << (j - 1);
        if base_mask & bit != 0 {
            continue;
        }
        let p = sys.prob_mask(base_mask | bit).ok_or_else(|| {
            BoundsError::Model(EventModelError::Invalid(format!(
                "missing order-{} intersection entry",
                k + 1
            )))
        })?;
        pairs.push((p, j));
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(WValues {
        subset: subset.to_vec(),
        values: pairs.into_iter().map(|(p, _)| p).collect(),
    })
}

fn theorem5_correction(sys: &EventSystem, k: usize) -> Result<f64, BoundsError> {
    let n = sys.n();
    let weights: Vec<f64> = (1..=n - k)
        .map(|s| permutation_weight(k as u32, s as u32).map(|q| ratio_f64(&q)))
        .collect::<Result<_, _>>()?;
    let mut acc = CompensatedSum::new();
    for subset in k_subsets(n, k) {
        let w = w_values(sys, &subset)?;
        for (weight, value) in weights.iter().zip(w.values()) {
            acc.add(weight * value);
        }
    }
    Ok(acc.value())
}

/// Labeling-averaged bound for `r = 1`: correction
/// `sum_{k-subsets} sum_s W_s * k/((k+s)(k+s-1))`. Invariant under
/// relabeling, since both the subsets and the order statistics are.
pub fn theorem5_bound(sys: &EventSystem, k: usize) -> Result<BoundResult, BoundsError> {
    if k == 0 || k >= sys.n() {
        return Err(BoundsError::Domain(format!(
            "requires 1 <= k < n, got k={k}, n={}",
            sys.n()
        )));
    }
    check_depth_for_correction(sys, k)?;
    let s = s_sums(sys)?;
    let partial = partial_sum(&s, 1, k)?;
    let correction = theorem5_correction(sys, k)?;
    Ok(assemble(
        Method::Theorem5,
        1,
        k,
        partial,
        correction,
        Some("labeling-invariant".into()),
    ))
}

/// Sample mean and standard error over seeded random relabelings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of [`theorem5_bound`]'s correction: each trial draws
/// a uniform random labeling and evaluates the labeling-dependent r = 1
/// correction under it. Unbiased by the permutation-weight identity, and
/// deterministic in `seed`.
pub fn mc_permutation_estimate(
    sys: &EventSystem,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<McEstimate, BoundsError> {
    if trials < 2 {
        return Err(BoundsError::Domain(format!(
            "need at least 2 trials, got {trials}"
        )));
    }
    if k == 0 || k >= sys.n() {
        return Err(BoundsError::Domain(format!(
            "requires 1 <= k < n, got k={k}, n={}",
            sys.n()
        )));
    }
    check_depth_for_correction(sys, k)?;
    let n = sys.n();

    // per k-subset: members plus (extension index, probability) list
    struct SubsetInfo {
        members: Vec<usize>,
        extensions: Vec<(usize, f64)>,
    }
    let mut infos = Vec::new();
    for subset in k_subsets(n, k) {
        let base_mask = mask_of(&subset);
        let mut extensions = Vec::with_capacity(n - k);
        for j in 1..=n {
            let bit = 1u64 << (j - 1);
            if base_mask & bit != 0 {
                continue;
            }
            let p = sys.prob_mask(base_mask | bit).ok_or_else(|| {
                BoundsError::Model(EventModelError::Invalid(format!(
                    "missing order-{} intersection entry",
                    k + 1
                )))
            })?;
            extensions.push((j, p));
        }
        infos.push(SubsetInfo {
            members: subset,
            extensions,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (1..=n).collect();
    let mut position = vec![0usize; n + 1];
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        order.shuffle(&mut rng);
        for (pos, &event) in order.iter().enumerate() {
            position[event] = pos;
        }
        let mut value = CompensatedSum::new();
        for info in &infos {
            let max_pos = info
                .members
                .iter()
                .map(|&e| position[e])
                .max()
                .expect("subsets are nonempty");
            let mut best = 0.0f64;
            for &(j, p) in &info.extensions {
                if position[j] > max_pos && p > best {
                    best = p;
                }
            }
            value.add(best);
        }
        samples.push(value.value());
    }

    let mean = crate::kahan::compensated_sum(samples.iter().copied()) / trials as f64;
    let ss = crate::kahan::compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
    let stderr = (ss / (trials as f64 - 1.0)).sqrt() / (trials as f64).sqrt();
    Ok(McEstimate { mean, stderr })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Labeling as a permutation image: event `i` of the result is event
    /// `labeling[i-1]` of the input.
    pub labeling: Vec<usize>,
    pub examined: usize,
    pub result: BoundResult,
}

/// Ceiling for exhaustive labeling search (n! labelings).
pub const EXHAUSTIVE_SEARCH_CAP: usize = 8;

/// Search labelings for the largest labeling-dependent correction.
/// Exhaustive mode walks all n! labelings (refused above
/// [`EXHAUSTIVE_SEARCH_CAP`]); sampled mode draws `budget` seeded labelings,
/// so a larger budget over the same seed can only improve the result.
pub fn best_numbering_search(
    sys: &EventSystem,
    r: usize,
    k: usize,
    mode: SearchMode,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome, BoundsError> {
    require_rk(r, k)?;
    check_depth_for_correction(sys, k)?;
    let n = sys.n();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut examined = 0usize;

    let mut consider = |perm: &[usize], sys: &EventSystem| -> Result<(f64, f64), BoundsError> {
        let relabeled = relabel(sys, perm)?;
        let corr = theorem4_correction(&relabeled, r, k)?;
        Ok((corr, 0.0))
    };

    match mode {
        SearchMode::Exhaustive => {
            if n > EXHAUSTIVE_SEARCH_CAP {
                return Err(BoundsError::Domain(format!(
                    "exhaustive search refused for n={n} > {EXHAUSTIVE_SEARCH_CAP}; \
                     use sampled mode with --budget"
                )));
            }
            let mut perm: Vec<usize> = (1..=n).collect();
            loop {
                let (corr, _) = consider(&perm, sys)?;
                examined += 1;
                if best.as_ref().map_or(true, |(b, _)| corr > *b) {
                    best = Some((corr, perm.clone()));
                }
                if !next_permutation(&mut perm) {
                    break;
                }
            }
        }
        SearchMode::Sampled => {
            if budget == 0 {
                return Err(BoundsError::Domain("budget must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (1..=n).collect();
            for _ in 0..budget {
                perm.shuffle(&mut rng);
                let (corr, _) = consider(&perm, sys)?;
                examined += 1;
                if best.as_ref().map_or(true, |(b, _)| corr > *b) {
                    best = Some((corr, perm.clone()));
                }
            }
        }
    }

    let (_, labeling) = best.expect("at least one labeling examined");
    let relabeled = relabel(sys, &labeling)?;
    let mut result = theorem4_bound(&relabeled, r, k)?;
    result.labeling_note = Some(format!(
        "labeling {labeling:?} ({examined} examined, {})",
        match mode {
            SearchMode::Exhaustive => "exhaustive",
            SearchMode::Sampled => "sampled",
        }
    ));
    Ok(SearchOutcome {
        labeling,
        examined,
        result,
    })
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Tolerance for sandwich verdicts against the exact oracle.
pub const SANDWICH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFailure {
    pub method: Method,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichVerdict {
    pub method: Method,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactBlock {
    pub value: f64,
    pub verdicts: Vec<SandwichVerdict>,
}

/// Assembled table: one row per applicable method, failures carried
/// alongside rather than aborting the rest, and an exact column with
/// per-row sandwich verdicts when a joint is supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<BoundResult>,
    pub failures: Vec<MethodFailure>,
    pub exact: Option<ExactBlock>,
}

/// Compute every applicable bound for `(r, k)`. The classical row falls back
/// to `k' = min(k, depth)`; correction rows need order `k+1`. The
/// labeling-averaged row applies only at `r = 1`.
pub fn bounds_report(
    sys: &EventSystem,
    r: usize,
    k: usize,
    joint: Option<&JointDistribution>,
) -> Report {
    let mut rows = Vec::new();
    let mut failures = Vec::new();

    match s_sums(sys) {
        Err(e) => {
            for method in [Method::Classical, Method::Theorem3, Method::Theorem4] {
                failures.push(MethodFailure {
                    method,
                    error: e.to_string(),
                });
            }
            if r == 1 {
                failures.push(MethodFailure {
                    method: Method::Theorem5,
                    error: e.to_string(),
                });
            }
        }
        Ok(s) => {
            let k_classical = k.min(s.depth());
            match classical_bound(&s, r, k_classical) {
                Ok(row) => rows.push(row),
                Err(e) => failures.push(MethodFailure {
                    method: Method::Classical,
                    error: e.to_string(),
                }),
            }
            match theorem3_bound(&s, sys.n(), r, k) {
                Ok(row) => rows.push(row),
                Err(e) => failures.push(MethodFailure {
                    method: Method::Theorem3,
                    error: e.to_string(),
                }),
            }
            match theorem4_bound(sys, r, k) {
                Ok(row) => rows.push(row),
                Err(e) => failures.push(MethodFailure {
                    method: Method::Theorem4,
                    error: e.to_string(),
                }),
            }
            if r == 1 {
                match theorem5_bound(sys, k) {
                    Ok(row) => rows.push(row),
                    Err(e) => failures.push(MethodFailure {
                        method: Method::Theorem5,
                        error: e.to_string(),
                    }),
                }
            }
        }
    }

    let exact = joint.and_then(|j| {
        let value = prob_at_least(j, r.min(j.n() + 1)).ok()?;
        let verdicts = rows
            .iter()
            .map(|row| SandwichVerdict {
                method: row.method,
                pass: match row.direction {
                    Direction::Lower => row.value <= value + SANDWICH_TOLERANCE,
                    Direction::Upper => row.value >= value - SANDWICH_TOLERANCE,
                },
            })
            .collect();
        Some(ExactBlock { value, verdicts })
    });

    Report {
        rows,
        failures,
        exact,
    }
}

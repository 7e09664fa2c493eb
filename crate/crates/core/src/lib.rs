//! Rigorous upper and lower bounds on the probability that at least `r` of
//! `n` events occur, from intersection probabilities up to order `k+1`.
//!
//! Four bound families share one decomposition: the truncated
//! inclusion-exclusion partial sum plus a nonnegative correction whose sign
//! is set by the parity of `r+k`. The correction grows sharper as it uses
//! finer information:
//!
//! - classical truncation (no correction),
//! - the optimal coefficient on `S_{k+1}`,
//! - per-subset best extensions under a fixed labeling,
//! - the labeling-averaged order-statistic form (for `r = 1`).
//!
//! An exact oracle over fully specified joint distributions (2^n atoms)
//! backs every bound with a sandwich test, and [`verify`] packages the
//! identity and oracle suites behind one summary.

pub mod bounds;
pub mod combinatorics;
pub mod event_model;
pub mod exact_oracle;
mod kahan;
pub mod subsets;
pub mod verify;

pub use bounds::{
    best_numbering_search, bounds_report, classical_bound, lemma3_rhs, mc_permutation_estimate,
    partial_sum, theorem3_bound, theorem4_bound, theorem5_bound, w_values, BoundResult,
    BoundsError, Direction, McEstimate, Method, Report, SearchMode, SearchOutcome,
};
pub use combinatorics::{
    alpha_coefficient, binom, galambos_coefficient, lemma1_sum, lemma4_enumerated,
    permutation_weight, tail_identity, BinomialTable, CombinatoricsError, Rational,
};
pub use event_model::{
    from_independent, from_joint, independent_joint, random_joint, relabel, s_sums, validate,
    EventModelError, EventSystem, JointDistribution, SSums, Violation,
};
pub use exact_oracle::{
    count_pmf, expected_binom_shifted, inclusion_exclusion_exact, prob_at_least,
    theorem2_decomposition, CountPmf, Decomposition, OracleError,
};
pub use verify::{run_verification, SuiteReport, VerifyOptions, VerifySummary};

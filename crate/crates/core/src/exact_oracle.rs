//! Ground truth by atom enumeration over fully specified joints.
//!
//! Nothing here is a bound: `P(X >= r)`, the shifted binomial-moment
//! expectations, the full inclusion-exclusion sum, and the partial/remainder
//! decomposition are all exact (up to compensated f64 accumulation), so the
//! bounds engine can be tested against them.

use thiserror::Error;

use crate::combinatorics::{binom_f64, CombinatoricsError};
use crate::event_model::{JointDistribution, SSums};
use crate::kahan::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
}

/// Distribution of `X`, the number of events that occur: `probs[x] = P(X=x)`
/// for `x = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPmf {
    probs: Vec<f64>,
}

impl CountPmf {
    pub fn n(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Bucket atom masses by popcount.
pub fn count_pmf(joint: &JointDistribution) -> CountPmf {
    let mut acc = vec![CompensatedSum::new(); joint.n() + 1];
    for (atom, &m) in joint.mass().iter().enumerate() {
        acc[atom.count_ones() as usize].add(m);
    }
    CountPmf {
        probs: acc.into_iter().map(|a| a.value()).collect(),
    }
}

/// Exact `P(X >= r)`; `r` may run to `n+1` (empty tail = 0).
pub fn prob_at_least(joint: &JointDistribution, r: usize) -> Result<f64, OracleError> {
    let n = joint.n();
    if r > n + 1 {
        return Err(OracleError::Domain(format!(
            "r must be in 0..={} for n={n}, got {r}",
            n + 1
        )));
    }
    let pmf = count_pmf(joint);
    let mut acc = CompensatedSum::new();
    for x in r..=n {
        acc.add(pmf.probs()[x]);
    }
    Ok(acc.value())
}

/// `E[C(X-i, m)]` under the extended binomial convention (terms with
/// `x - i < m` or `x < i` vanish).
pub fn expected_binom_shifted(
    joint: &JointDistribution,
    i: usize,
    m: usize,
) -> Result<f64, OracleError> {
    let pmf = count_pmf(joint);
    expected_binom_shifted_pmf(&pmf, i, m)
}

fn expected_binom_shifted_pmf(pmf: &CountPmf, i: usize, m: usize) -> Result<f64, OracleError> {
    let mut acc = CompensatedSum::new();
    for (x, &p) in pmf.probs().iter().enumerate() {
        let coeff = binom_f64(x as i64 - i as i64, m as i64)?;
        if coeff != 0.0 {
            acc.add(p * coeff);
        }
    }
    Ok(acc.value())
}

/// Full inclusion-exclusion sum `sum_{j=r}^{n} (-1)^{r+j} C(j-1,r-1) S_j`.
/// Requires the complete moment vector (`depth = n`).
pub fn inclusion_exclusion_exact(s: &SSums, r: usize, n: usize) -> Result<f64, OracleError> {
    if s.depth() != n {
        return Err(OracleError::Domain(format!(
            "need S_1..S_n (depth {n}), got depth {}",
            s.depth()
        )));
    }
    if r == 0 || r > n {
        return Err(OracleError::Domain(format!(
            "r must be in 1..={n}, got {r}"
        )));
    }
    let mut acc = CompensatedSum::new();
    for j in r..=n {
        let coeff = binom_f64(j as i64 - 1, r as i64 - 1)?;
        let term = coeff * s.s(j);
        acc.add(if (r + j) % 2 == 0 { term } else { -term });
    }
    Ok(acc.value())
}

/// The partial/remainder split of `P(X >= r)` at truncation order `k`:
/// `partial = sum_{j=r}^{k} (-1)^{r+j} C(j-1,r-1) S_j`,
/// `remainder = sum_{i=1}^{r} C(k-i,r-i) E[C(X-i, k-i+1)]`,
/// `reconstructed = partial + (-1)^{r+k+1} remainder`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub partial: f64,
    pub remainder: f64,
    pub reconstructed: f64,
}

/// `k >= n` is fine: `S_j` vanishes for `j > n` and the remainder
/// expectations vanish once `k - i + 1` exceeds `X - i`, so the
/// reconstruction degrades gracefully to the full sum.
pub fn theorem2_decomposition(
    joint: &JointDistribution,
    r: usize,
    k: usize,
) -> Result<Decomposition, OracleError> {
    if r == 0 {
        return Err(OracleError::Domain("r must be positive".into()));
    }
    if k < r {
        return Err(OracleError::Domain(format!(
            "decomposition requires k >= r, got k={k}, r={r}"
        )));
    }
    let n = joint.n();
    let pmf = count_pmf(joint);

    let mut partial_acc = CompensatedSum::new();
    for j in r..=k.min(n) {
        // S_j = E[C(X, j)] for a genuine joint
        let s_j = expected_binom_shifted_pmf(&pmf, 0, j)?;
        let coeff = binom_f64(j as i64 - 1, r as i64 - 1)?;
        let term = coeff * s_j;
        partial_acc.add(if (r + j) % 2 == 0 { term } else { -term });
    }
    let partial = partial_acc.value();

    let mut remainder_acc = CompensatedSum::new();
    for i in 1..=r {
        let coeff = binom_f64(k as i64 - i as i64, r as i64 - i as i64)?;
        if coeff != 0.0 {
            remainder_acc.add(coeff * expected_binom_shifted_pmf(&pmf, i, k - i + 1)?);
        }
    }
    let remainder = remainder_acc.value();

    let signed = if (r + k + 1) % 2 == 0 { remainder } else { -remainder };
    Ok(Decomposition {
        partial,
        remainder,
        reconstructed: partial + signed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::{
        from_joint, independent_joint, random_joint, s_sums, JointDistribution,
    };

    fn example_joint() -> JointDistribution {
        let alphas: Vec<f64> = (1..=6).map(|t| (t as f64 + 18.0) / 100.0).collect();
        independent_joint(&alphas).unwrap()
    }

    #[test]
    fn count_pmf_unit_mass() {
        let mut mass = vec![0.0; 16];
        mass[0b1111] = 1.0;
        let j = JointDistribution::new(mass).unwrap();
        let pmf = count_pmf(&j);
        assert_eq!(pmf.probs()[4], 1.0);
        assert_eq!(pmf.probs()[..4], [0.0; 4]);
    }

    #[test]
    fn count_pmf_symmetric_pair() {
        let j = independent_joint(&[0.5, 0.5]).unwrap();
        let pmf = count_pmf(&j);
        assert!((pmf.probs()[0] - 0.25).abs() < 1e-15);
        assert!((pmf.probs()[1] - 0.5).abs() < 1e-15);
        assert!((pmf.probs()[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn count_pmf_example_p0() {
        let pmf = count_pmf(&example_joint());
        assert!((pmf.probs()[0] - 0.23366895552).abs() < 1e-9);
    }

    #[test]
    fn prob_at_least_edges() {
        let j = example_joint();
        assert!((prob_at_least(&j, 0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(prob_at_least(&j, 7).unwrap(), 0.0);
        assert!((prob_at_least(&j, 1).unwrap() - 0.76633104448).abs() < 1e-9);
        assert!(prob_at_least(&j, 8).is_err());
    }

    #[test]
    fn prob_at_least_nonincreasing_in_r() {
        let j = random_joint(6, 11).unwrap();
        let mut prev = prob_at_least(&j, 0).unwrap();
        assert!((prev - 1.0).abs() < 1e-12);
        for r in 1..=7 {
            let cur = prob_at_least(&j, r).unwrap();
            assert!(cur <= prev + 1e-15, "r={r}");
            prev = cur;
        }
    }

    #[test]
    fn expected_binom_shifted_examples() {
        let j = example_joint();
        // (i=1, m=2) equals P(X>=1) - (S_1 - S_2)
        assert!((expected_binom_shifted(&j, 1, 2).unwrap() - 0.16883104448).abs() < 1e-9);

        let mut mass = vec![0.0; 8];
        mass[0b111] = 1.0;
        let unit = JointDistribution::new(mass).unwrap();
        assert_eq!(expected_binom_shifted(&unit, 1, 2).unwrap(), 1.0);
    }

    #[test]
    fn expected_binom_matches_s_sums() {
        let j = random_joint(5, 99).unwrap();
        let sys = from_joint(&j, 5).unwrap();
        let s = s_sums(&sys).unwrap();
        for m in 1..=5 {
            let e = expected_binom_shifted(&j, 0, m).unwrap();
            assert!((e - s.s(m)).abs() < 1e-9, "m={m}: {e} vs {}", s.s(m));
        }
    }

    #[test]
    fn inclusion_exclusion_two_events() {
        let s = SSums::new(vec![1.0, 0.25]).unwrap();
        assert!((inclusion_exclusion_exact(&s, 1, 2).unwrap() - 0.75).abs() < 1e-15);
        assert!((inclusion_exclusion_exact(&s, 2, 2).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn inclusion_exclusion_requires_full_depth() {
        let s = SSums::new(vec![1.0, 0.25]).unwrap();
        assert!(inclusion_exclusion_exact(&s, 1, 3).is_err());
    }

    #[test]
    fn inclusion_exclusion_matches_oracle() {
        let j = random_joint(6, 12345).unwrap();
        let sys = from_joint(&j, 6).unwrap();
        let s = s_sums(&sys).unwrap();
        for r in 1..=6 {
            let ie = inclusion_exclusion_exact(&s, r, 6).unwrap();
            let exact = prob_at_least(&j, r).unwrap();
            assert!((ie - exact).abs() < 1e-9, "r={r}: {ie} vs {exact}");
        }
    }

    #[test]
    fn decomposition_example() {
        let j = example_joint();
        let d = theorem2_decomposition(&j, 1, 2).unwrap();
        assert!((d.partial - 0.5975).abs() < 1e-9);
        assert!((d.remainder - 0.16883104448).abs() < 1e-9);
        assert!((d.reconstructed - 0.76633104448).abs() < 1e-9);
    }

    #[test]
    fn decomposition_empty_atom() {
        let mut mass = vec![0.0; 8];
        mass[0] = 1.0;
        let j = JointDistribution::new(mass).unwrap();
        for r in 1..=3 {
            for k in r..=3 {
                let d = theorem2_decomposition(&j, r, k).unwrap();
                assert_eq!((d.partial, d.remainder, d.reconstructed), (0.0, 0.0, 0.0));
            }
        }
    }

    #[test]
    fn decomposition_at_r_equals_k_equals_n() {
        let j = random_joint(4, 5).unwrap();
        let d = theorem2_decomposition(&j, 4, 4).unwrap();
        let s = s_sums(&from_joint(&j, 4).unwrap()).unwrap();
        assert!((d.partial - s.s(4)).abs() < 1e-9);
        assert!((d.reconstructed - prob_at_least(&j, 4).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn decomposition_accepts_k_beyond_n() {
        let j = random_joint(4, 77).unwrap();
        for r in 1..=4 {
            let d = theorem2_decomposition(&j, r, 7).unwrap();
            let exact = prob_at_least(&j, r).unwrap();
            assert!((d.reconstructed - exact).abs() < 1e-9, "r={r}");
            assert!(d.remainder.abs() < 1e-12, "remainder should vanish past n");
        }
    }

    #[test]
    fn decomposition_reconstructs_across_grid() {
        for seed in [1u64, 2, 3] {
            let j = random_joint(7, seed).unwrap();
            for r in 1..=7 {
                for k in r..=7 {
                    let d = theorem2_decomposition(&j, r, k).unwrap();
                    let exact = prob_at_least(&j, r).unwrap();
                    assert!(
                        (d.reconstructed - exact).abs() < 1e-9,
                        "seed={seed} r={r} k={k}"
                    );
                    assert!(d.remainder >= -1e-12, "seed={seed} r={r} k={k}");
                }
            }
        }
    }

    #[test]
    fn decomposition_domain_errors() {
        let j = random_joint(3, 1).unwrap();
        assert!(theorem2_decomposition(&j, 0, 2).is_err());
        assert!(theorem2_decomposition(&j, 3, 2).is_err());
    }
}

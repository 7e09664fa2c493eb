//! Exact integer and rational kernels.
//!
//! Everything here is integer or rational arithmetic with overflow checking:
//! extended binomial coefficients, the two alternating-sum identities that
//! drive the truncation bounds, the optimal correction coefficient (plus the
//! Galambos form it coincides with), and random-permutation weights. Floating
//! point never enters; callers convert at bound-assembly time.

use std::sync::OnceLock;

use num_rational::Ratio;
use thiserror::Error;

/// Exact rational with reduced form and positive denominator, as maintained
/// by `Ratio`'s constructors.
pub type Rational = Ratio<i128>;

/// Largest `t` the shared coefficient table supports. `C(128, 64)` still fits
/// an `i128`, so the full triangle is exact.
pub const TABLE_CAPACITY: usize = 128;

/// Cap on `m`, `k`, `r` for the identity kernels. Keeps every alternating-sum
/// term product within `i128` under checked arithmetic.
pub const KERNEL_CAP: u32 = 60;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombinatoricsError {
    #[error("capacity exceeded: C({t},{s}) needs a table larger than max_t={max_t}")]
    CapacityExceeded { t: i64, s: i64, max_t: usize },
    #[error("integer overflow in exact accumulation")]
    Overflow,
    #[error("domain error: {0}")]
    Domain(String),
}

/// Dense triangle of binomial coefficients under the extended convention:
/// `C(t,s) = 0` when `min(s,t) < 0` or `s > t`.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    max_t: usize,
    rows: Vec<Vec<i128>>,
}

impl BinomialTable {
    /// Build the triangle for `0 <= s <= t <= max_t` via the Pascal
    /// recurrence, failing on i128 overflow rather than wrapping.
    pub fn new(max_t: usize) -> Result<Self, CombinatoricsError> {
        let mut rows: Vec<Vec<i128>> = Vec::with_capacity(max_t + 1);
        for t in 0..=max_t {
            let mut row = vec![0i128; t + 1];
            row[0] = 1;
            row[t] = 1;
            for s in 1..t {
                row[s] = rows[t - 1][s - 1]
                    .checked_add(rows[t - 1][s])
                    .ok_or(CombinatoricsError::Overflow)?;
            }
            rows.push(row);
        }
        Ok(Self { max_t, rows })
    }

    pub fn max_t(&self) -> usize {
        self.max_t
    }

    /// `C(t,s)` with the zero convention for out-of-triangle lookups.
    /// Errors only when `t` exceeds the table's capacity.
    pub fn get(&self, t: i64, s: i64) -> Result<i128, CombinatoricsError> {
        if s.min(t) < 0 || s > t {
            return Ok(0);
        }
        if t as usize > self.max_t {
            return Err(CombinatoricsError::CapacityExceeded {
                t,
                s,
                max_t: self.max_t,
            });
        }
        Ok(self.rows[t as usize][s as usize])
    }
}

fn shared_table() -> &'static BinomialTable {
    static TABLE: OnceLock<BinomialTable> = OnceLock::new();
    TABLE.get_or_init(|| BinomialTable::new(TABLE_CAPACITY).expect("triangle up to 128 fits i128"))
}

/// Extended binomial coefficient `C(t,s)` off the shared table.
pub fn binom(t: i64, s: i64) -> Result<i128, CombinatoricsError> {
    shared_table().get(t, s)
}

/// `C(t,s)` as f64, for bound assembly where operands are well inside 2^53.
pub(crate) fn binom_f64(t: i64, s: i64) -> Result<f64, CombinatoricsError> {
    Ok(binom(t, s)? as f64)
}

fn check_kernel_cap(vals: &[(&str, u32)]) -> Result<(), CombinatoricsError> {
    for (name, v) in vals {
        if *v > KERNEL_CAP {
            return Err(CombinatoricsError::Domain(format!(
                "{name}={v} exceeds kernel cap {KERNEL_CAP}"
            )));
        }
    }
    Ok(())
}

fn sign(exp: u32) -> i128 {
    if exp % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Evaluates the sum `sum_{j=r}^{m} (-1)^{r+j} C(j-1,r-1) C(m,j)` literally.
/// The identity (value is 1 when `m >= r`, else 0) is a tested property,
/// not an assumption.
pub fn lemma1_sum(m: u32, r: u32) -> Result<i128, CombinatoricsError> {
    if r == 0 {
        return Err(CombinatoricsError::Domain("r must be positive".into()));
    }
    check_kernel_cap(&[("m", m), ("r", r)])?;
    let mut acc: i128 = 0;
    for j in r..=m {
        let term = binom(j as i64 - 1, r as i64 - 1)?
            .checked_mul(binom(m as i64, j as i64)?)
            .ok_or(CombinatoricsError::Overflow)?;
        acc = acc
            .checked_add(
                sign(r + j)
                    .checked_mul(term)
                    .ok_or(CombinatoricsError::Overflow)?,
            )
            .ok_or(CombinatoricsError::Overflow)?;
    }
    Ok(acc)
}

/// Both sides of the tail identity, evaluated independently:
/// `lhs = sum_{j=k+1}^{m} (-1)^j C(j-1,r-1) C(m,j)`,
/// `rhs = (-1)^{k+1} sum_{i=1}^{r} C(k-i,r-i) C(m-i,k-i+1)`.
/// Their equality is the tested property.
pub fn tail_identity(m: u32, k: u32, r: u32) -> Result<(i128, i128), CombinatoricsError> {
    if k < r {
        return Err(CombinatoricsError::Domain(format!(
            "tail identity requires k >= r, got k={k}, r={r}"
        )));
    }
    check_kernel_cap(&[("m", m), ("k", k), ("r", r)])?;

    let mut lhs: i128 = 0;
    for j in (k + 1)..=m {
        let term = binom(j as i64 - 1, r as i64 - 1)?
            .checked_mul(binom(m as i64, j as i64)?)
            .ok_or(CombinatoricsError::Overflow)?;
        lhs = lhs
            .checked_add(
                sign(j)
                    .checked_mul(term)
                    .ok_or(CombinatoricsError::Overflow)?,
            )
            .ok_or(CombinatoricsError::Overflow)?;
    }

    let mut inner: i128 = 0;
    for i in 1..=r {
        let term = binom(k as i64 - i as i64, r as i64 - i as i64)?
            .checked_mul(binom(m as i64 - i as i64, k as i64 - i as i64 + 1)?)
            .ok_or(CombinatoricsError::Overflow)?;
        inner = inner.checked_add(term).ok_or(CombinatoricsError::Overflow)?;
    }
    let rhs = sign(k + 1)
        .checked_mul(inner)
        .ok_or(CombinatoricsError::Overflow)?;

    Ok((lhs, rhs))
}

fn check_coefficient_domain(n: u32, k: u32, r: u32) -> Result<(), CombinatoricsError> {
    if !(1 <= r && r <= k && k < n) {
        return Err(CombinatoricsError::Domain(format!(
            "coefficient requires 1 <= r <= k < n, got n={n}, k={k}, r={r}"
        )));
    }
    check_kernel_cap(&[("n", n), ("k", k), ("r", r)])
}

/// The optimal correction coefficient
/// `alpha = sum_{i=1}^{r} C(k-i,r-i) C(k+1,i) / C(n,i)`, exact.
///
/// Multiplied by `S_{k+1}` it is the sharpest correction of its form; note it
/// can exceed 1 once `r >= 2` (e.g. alpha(3,2,2) = 2).
pub fn alpha_coefficient(n: u32, k: u32, r: u32) -> Result<Rational, CombinatoricsError> {
    check_coefficient_domain(n, k, r)?;
    let mut acc = Rational::new(0, 1);
    for i in 1..=r {
        let num = binom(k as i64 - i as i64, r as i64 - i as i64)?
            .checked_mul(binom(k as i64 + 1, i as i64)?)
            .ok_or(CombinatoricsError::Overflow)?;
        let den = binom(n as i64, i as i64)?;
        acc += Rational::new(num, den);
    }
    Ok(acc)
}

/// The same coefficient in the Galambos form:
/// `(-1)^{r+k} (sum_{j=0}^{k-r} (-1)^j C(r+j-1,r-1) C(n,r+j) - 1) / C(n,k+1)`.
///
/// The leading `(-1)^{r+k}` is our normalization: the bare expression comes
/// out with the opposite sign for odd `r+k` (it is -1/2 at n=6, k=2, r=1,
/// against alpha = +1/2), which the identity suites would reject. Equality
/// with [`alpha_coefficient`] is property-tested over the full domain.
pub fn galambos_coefficient(n: u32, k: u32, r: u32) -> Result<Rational, CombinatoricsError> {
    check_coefficient_domain(n, k, r)?;
    let mut inner: i128 = 0;
    for j in 0..=(k - r) {
        let term = binom(r as i64 + j as i64 - 1, r as i64 - 1)?
            .checked_mul(binom(n as i64, r as i64 + j as i64)?)
            .ok_or(CombinatoricsError::Overflow)?;
        inner = inner
            .checked_add(
                sign(j)
                    .checked_mul(term)
                    .ok_or(CombinatoricsError::Overflow)?,
            )
            .ok_or(CombinatoricsError::Overflow)?;
    }
    let den = binom(n as i64, k as i64 + 1)?;
    Ok(Rational::new(sign(r + k) * (inner - 1), den))
}

/// Probability that, in a random permutation, a designated index is the only
/// one of `s` trailing indices to follow all of `k` leading indices:
/// `k / ((k+s)(k+s-1))`, exact.
pub fn permutation_weight(k: u32, s: u32) -> Result<Rational, CombinatoricsError> {
    if k == 0 || s == 0 {
        return Err(CombinatoricsError::Domain(format!(
            "permutation weight requires k >= 1 and s >= 1, got k={k}, s={s}"
        )));
    }
    let ks = (k + s) as i128;
    Ok(Rational::new(k as i128, ks * (ks - 1)))
}

/// Cap on `k + s` for [`lemma4_enumerated`]; (k+s)! relative orders are
/// enumerated outright.
pub const ENUMERATION_CAP: u32 = 8;

/// The same probability as [`permutation_weight`], obtained by counting all
/// `(k+s)!` relative orders of the k+s relevant indices. Only relative order
/// matters, so the full n-permutation never needs to be expanded.
pub fn lemma4_enumerated(k: u32, s: u32) -> Result<Rational, CombinatoricsError> {
    if k == 0 || s == 0 {
        return Err(CombinatoricsError::Domain(format!(
            "enumeration requires k >= 1 and s >= 1, got k={k}, s={s}"
        )));
    }
    if k + s > ENUMERATION_CAP {
        return Err(CombinatoricsError::Domain(format!(
            "k+s={} exceeds enumeration cap {ENUMERATION_CAP}",
            k + s
        )));
    }
    let m = (k + s) as usize;
    // items 0..k are the leading block, items k..k+s the trailing block,
    // with item k+s-1 the designated one.
    let mut order: Vec<usize> = (0..m).collect();
    let mut hits: i128 = 0;
    let mut total: i128 = 0;
    permute(&mut order, 0, &mut |perm| {
        total += 1;
        let mut pos = vec![0usize; m];
        for (p, &item) in perm.iter().enumerate() {
            pos[item] = p;
        }
        let lead_max = (0..k as usize).map(|i| pos[i]).max().unwrap();
        let designated_follows = pos[m - 1] > lead_max;
        let earlier_follows = (k as usize..m - 1).any(|j| pos[j] > lead_max);
        if designated_follows && !earlier_follows {
            hits += 1;
        }
    });
    Ok(Rational::new(hits, total))
}

fn permute<F: FnMut(&[usize])>(items: &mut Vec<usize>, start: usize, visit: &mut F) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

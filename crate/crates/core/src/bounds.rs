//! Closed-form probability bounds for non-shattering events, and the exact
//! combinatorial quantities they are checked against.
//!
//! Notation: `k = p^d` is the number of signatures of a `d`-dimensional subspace,
//! `q` the number of sampled rows, `m` the dimension of a pairwise intersection and
//! `ell` the number of subspaces in a family.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::checked_pow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Lower bound on `Pr[Q does not shatter V]` for one subspace.
    MissLower,
    /// Upper bound on `Pr[Q shatters neither V1 nor V2]`.
    JointMissUpper,
    /// Inclusion–exclusion lower bound on `Pr[some family member is not shattered]`.
    FamilyFailureLower,
    /// Exact coupon-collector failure probability.
    CouponExact,
    /// Number of `d`-dimensional subspaces of F_p^n.
    SubspaceCount,
    /// Guaranteed size of a pairwise-low-intersection family.
    FamilyThreshold,
    /// `(estimate - ci)^{1/s}`, the per-chunk failure floor implied by a split run.
    BoostRoot,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::MissLower => "miss_lower",
            BoundKind::JointMissUpper => "joint_miss_upper",
            BoundKind::FamilyFailureLower => "family_failure_lower",
            BoundKind::CouponExact => "coupon_exact",
            BoundKind::SubspaceCount => "subspace_count",
            BoundKind::FamilyThreshold => "family_threshold",
            BoundKind::BoostRoot => "boost_root",
        }
    }

    fn is_probability(&self) -> bool {
        !matches!(self, BoundKind::SubspaceCount | BoundKind::FamilyThreshold)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A bound evaluation. `raw` is the formula exactly as evaluated; `value` caps
/// probabilities at 1 for reporting and is `raw` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub kind: BoundKind,
    pub raw: f64,
    pub value: f64,
}

impl BoundValue {
    pub fn new(kind: BoundKind, raw: f64) -> Self {
        let value = if kind.is_probability() { raw.min(1.0) } else { raw };
        Self { kind, raw, value }
    }

    /// True when the bound carries no information: a probability lower bound `<= 0`,
    /// an upper bound `>= 1`, or a family size below one.
    pub fn is_vacuous(&self) -> bool {
        match self.kind {
            BoundKind::MissLower | BoundKind::FamilyFailureLower | BoundKind::BoostRoot => {
                self.raw <= 0.0
            }
            BoundKind::JointMissUpper => self.raw >= 1.0,
            BoundKind::FamilyThreshold => self.raw < 1.0,
            BoundKind::CouponExact | BoundKind::SubspaceCount => false,
        }
    }
}

fn require_k(k: u64, min: u64) -> Result<f64> {
    if k < min {
        return Err(Error::Precondition(format!("k = {k} must be at least {min}")));
    }
    Ok(k as f64)
}

/// Conditioning threshold for the alternating sum: above this total term mass the
/// occupancy recurrence is used instead.
const MAX_TERM_MASS: f64 = 16.0;

fn ln_binomial(k: u64, j: u64) -> f64 {
    let j = j.min(k - j);
    (0..j).map(|i| ((k - i) as f64 / (i + 1) as f64).ln()).sum()
}

fn binomial_f64(k: u64, j: u64) -> f64 {
    if k <= 60 {
        let j = j.min(k - j);
        let mut acc: u64 = 1;
        for i in 0..j {
            acc = acc * (k - i) / (i + 1);
        }
        acc as f64
    } else {
        ln_binomial(k, j).exp()
    }
}

/// Neumaier's compensated sum.
fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Probability that all `k` symbols appear in `q` uniform draws, by forward
/// recurrence on the number of distinct symbols seen. All terms are non-negative.
fn coverage_probability_recurrence(k: u64, q: u64) -> f64 {
    let k = k as usize;
    let kf = k as f64;
    let mut dist = vec![0.0f64; k + 1];
    dist[0] = 1.0;
    for t in 0..q as usize {
        let top = (t + 1).min(k);
        for j in (1..=top).rev() {
            dist[j] = dist[j] * (j as f64 / kf) + dist[j - 1] * ((kf - (j - 1) as f64) / kf);
        }
        dist[0] = 0.0;
    }
    dist[k]
}

/// Exact probability that `q` uniform draws from `k` symbols miss at least one:
/// `Σ_{j=1}^{k} (-1)^{j+1} C(k,j) (1 - j/k)^q`.
///
/// The alternating sum is used when its terms are small enough that cancellation
/// stays below ~1e-14; otherwise the equivalent occupancy recurrence is evaluated.
pub fn coupon_exact(k: u64, q: u64) -> Result<f64> {
    let kf = require_k(k, 1)?;
    if q < k {
        return Ok(1.0);
    }
    let qf = q as f64;
    let terms: Vec<f64> = (1..k)
        .map(|j| {
            let mag = if k <= 60 {
                binomial_f64(k, j) * (1.0 - j as f64 / kf).powf(qf)
            } else {
                (ln_binomial(k, j) + qf * (1.0 - j as f64 / kf).ln()).exp()
            };
            if j % 2 == 1 {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let mass: f64 = terms.iter().map(|t| t.abs()).sum();
    let value = if mass <= MAX_TERM_MASS {
        compensated_sum(terms)
    } else {
        1.0 - coverage_probability_recurrence(k, q)
    };
    Ok(value.clamp(0.0, 1.0))
}

/// [`coupon_exact`] in exact rational arithmetic.
pub fn coupon_exact_rational(k: u64, q: u64) -> Result<BigRational> {
    require_k(k, 1)?;
    let kb = BigInt::from(k);
    let mut numer = BigInt::zero();
    let mut binom = BigInt::one();
    for j in 1..=k {
        binom = binom * BigInt::from(k - j + 1) / BigInt::from(j);
        let term = &binom * num_traits::pow(BigInt::from(k - j), q as usize);
        if j % 2 == 1 {
            numer += term;
        } else {
            numer -= term;
        }
    }
    Ok(BigRational::new(numer, num_traits::pow(kb, q as usize)))
}

/// `k(1-1/k)^q (1 - k(1-1/(k-1))^q)`, a lower bound on the single-subspace
/// non-shattering probability. Requires `k >= 2`.
pub fn miss_probability_lower(k: u64, q: u64) -> Result<BoundValue> {
    let kf = require_k(k, 2)?;
    let qi = q as f64;
    let raw = kf * (1.0 - 1.0 / kf).powf(qi) * (1.0 - kf * (1.0 - 1.0 / (kf - 1.0)).powf(qi));
    Ok(BoundValue::new(BoundKind::MissLower, raw))
}

/// [`miss_probability_lower`] in exact rational arithmetic.
pub fn miss_probability_lower_rational(k: u64, q: u64) -> Result<BigRational> {
    require_k(k, 2)?;
    let kr = BigRational::from_integer(BigInt::from(k));
    let one = BigRational::one();
    let a = BigRational::new(BigInt::from(k - 1), BigInt::from(k));
    let b = BigRational::new(BigInt::from(k - 2), BigInt::from(k - 1));
    let q = q as usize;
    Ok(&kr * num_traits::pow(a, q) * (one - &kr * num_traits::pow(b, q)))
}

/// `k² (1-1/k)^q exp(-q (k - p^m) / ((k-1)k))`, an upper bound on the probability
/// that neither of two subspaces with `dim(V1 ∩ V2) = m` is shattered.
pub fn joint_miss_upper(p: u32, k: u64, m: usize, q: u64) -> Result<BoundValue> {
    let kf = require_k(k, 2)?;
    let pm = checked_pow(p, m)
        .filter(|&pm| pm <= k)
        .ok_or_else(|| Error::Precondition(format!("p^m = {p}^{m} exceeds k = {k}")))?;
    let qf = q as f64;
    let raw = kf * kf
        * (1.0 - 1.0 / kf).powf(qf)
        * (-qf * (kf - pm as f64) / ((kf - 1.0) * kf)).exp();
    Ok(BoundValue::new(BoundKind::JointMissUpper, raw))
}

/// The inclusion–exclusion lower bound for a family of `ell` pairwise-low-intersection
/// subspaces, before any simplification:
/// `ℓk(1-1/k)^q (1 - k(1-1/(k-1))^q - ℓk exp(-q/(k+√k)))`.
pub fn family_failure_lower(k: u64, q: u64, ell: f64) -> Result<BoundValue> {
    let kf = require_k(k, 2)?;
    if ell.is_nan() || ell < 1.0 {
        return Err(Error::Precondition(format!("ell = {ell} must be at least 1")));
    }
    let qf = q as f64;
    let first = ell * kf * (1.0 - 1.0 / kf).powf(qf);
    let bracket = 1.0
        - kf * (1.0 - 1.0 / (kf - 1.0)).powf(qf)
        - ell * kf * (-qf / (kf + kf.sqrt())).exp();
    Ok(BoundValue::new(BoundKind::FamilyFailureLower, first * bracket))
}

/// The family size that makes `ℓk·exp(-q/(k+√k)) = 1/e`.
pub fn tuned_family_size(k: u64, q: u64) -> f64 {
    let kf = k as f64;
    (q as f64 / (kf + kf.sqrt())).exp() / (std::f64::consts::E * kf)
}

/// [`family_failure_lower`] at [`tuned_family_size`]. The family size is not clamped
/// to `>= 1`; at small `q` it is fractional and the result is formal.
pub fn family_failure_lower_tuned(k: u64, q: u64) -> Result<BoundValue> {
    let kf = require_k(k, 2)?;
    let qf = q as f64;
    let ell = tuned_family_size(k, q);
    let first = ell * kf * (1.0 - 1.0 / kf).powf(qf);
    let bracket = 1.0
        - kf * (1.0 - 1.0 / (kf - 1.0)).powf(qf)
        - ell * kf * (-qf / (kf + kf.sqrt())).exp();
    Ok(BoundValue::new(BoundKind::FamilyFailureLower, first * bracket))
}

/// `C · exp(-q·2√k/(k²-k) - 1)`, the simplified form of the family bound for a given
/// constant `C`. For display only; validation uses [`family_failure_lower`].
pub fn family_failure_simplified(k: u64, q: u64, c: f64) -> f64 {
    let kf = k as f64;
    c * (-(q as f64) * 2.0 * kf.sqrt() / (kf * kf - kf) - 1.0).exp()
}

fn row_budget(p: u32, size: u64, k: u64, extra: f64) -> f64 {
    let kf = k as f64;
    let log_p_k = kf.ln() / (p as f64).ln();
    (kf + kf.sqrt())
        * ((log_p_k / 2.0 + 1.0) * ((size as f64).ln() - 3.0 * (2.0 * kf).ln()) + extra + kf.ln())
}

/// Largest `q` covered by the headline statement of the family bound.
pub fn max_rows_statement(p: u32, size: u64, k: u64) -> f64 {
    row_budget(p, size, k, 0.0)
}

/// Largest `q` for which the tuned family size fits inside the guaranteed family,
/// as derived in the argument (one more unit than the headline statement).
pub fn max_rows_derivation(p: u32, size: u64, k: u64) -> f64 {
    row_budget(p, size, k, 1.0)
}

/// Number of `d`-dimensional subspaces of F_p^n (the Gaussian binomial `[n, d]_p`).
pub fn subspace_count(p: u32, n: usize, d: usize) -> Result<u128> {
    if d > n {
        return Err(Error::Precondition(format!("d = {d} exceeds n = {n}")));
    }
    let overflow = || Error::Overflow(format!("[{n}, {d}]_{p}"));
    let pow = |e: usize| -> Result<u128> {
        let mut acc: u128 = 1;
        for _ in 0..e {
            acc = acc.checked_mul(p as u128).ok_or_else(overflow)?;
        }
        Ok(acc)
    };
    // [n, j]_p = [n, j-1]_p (p^{n-j+1} - 1) / (p^j - 1), integral at every step
    let mut acc: u128 = 1;
    for j in 1..=d {
        acc = acc
            .checked_mul(pow(n - j + 1)? - 1)
            .ok_or_else(overflow)?
            / (pow(j)? - 1);
    }
    Ok(acc)
}

/// `(N/(2k³))^{log_p(k)/2 + 1}`, the size of a pairwise-low-intersection family of
/// `log_p k`-dimensional subspaces guaranteed by counting. Requires `k <= N/2`.
pub fn family_threshold(p: u32, size: u64, k: u64) -> Result<BoundValue> {
    require_k(k, 1)?;
    if 2 * k > size {
        return Err(Error::Precondition(format!("k = {k} exceeds N/2 = {}", size / 2)));
    }
    let kf = k as f64;
    let base = size as f64 / (2.0 * kf * kf * kf);
    let exponent = kf.ln() / (p as f64).ln() / 2.0 + 1.0;
    Ok(BoundValue::new(BoundKind::FamilyThreshold, base.powf(exponent)))
}

//! Closed-form counts and probabilities for equi-n-squares.
//!
//! Every formula is transcribed term by term, alternating sums included, with
//! the negative-factorial convention of [`crate::numerics`]. Nothing here is
//! simplified algebraically; the census oracle in [`crate::oracle`] is what
//! establishes correctness at small orders.
//!
//! Notation used in the docs: `Ωₙ` is the set of all equi-n-squares, `Σₙ` the
//! consecutive ones, `R`/`C` those with at least one consecutive row/column,
//! `Rᵢ`/`Cᵢ` those with consecutive row/column `i`, and `i′ = n − i + 1`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use thiserror::Error;

use crate::numerics::{
    binomial, factorial_ratio, factorial_unsigned, indicator_even, ExactCount, ExactProb,
    LogApprox,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CountingError {
    #[error("formula inconsistency at n = {n}: {detail}")]
    FormulaInconsistency { n: u32, detail: String },
}

fn check_order(n: u32, min: u32) -> i64 {
    assert!(n >= min, "order must be at least {min}, got {n}");
    i64::from(n)
}

fn signed(v: BigUint) -> BigInt {
    BigInt::from(v)
}

fn unsigned(v: BigInt, what: &str, n: u32) -> ExactCount {
    ExactCount::from_signed(v).unwrap_or_else(|| panic!("{what} evaluated negative at n = {n}"))
}

/// `(n² − 2n + 1)! / ((n − 1)! (n − 2)!^(n−1))`
fn cross_one(n: i64) -> BigUint {
    factorial_ratio(&[n * n - 2 * n + 1], &[(n - 1, 1), (n - 2, (n - 1) as u32)])
}

/// `(n² − 3n + 2)! / ((n − 2)!² (n − 3)!^(n−2))`
fn cross_two(n: i64) -> BigUint {
    factorial_ratio(&[n * n - 3 * n + 2], &[(n - 2, 2), (n - 3, (n - 2) as u32)])
}

/// `(n² − 4n + 4)! / ((n − 2)!² (n − 4)!^(n−2))`
fn cross_four(n: i64) -> BigUint {
    factorial_ratio(&[n * n - 4 * n + 4], &[(n - 2, 2), (n - 4, (n - 2) as u32)])
}

/// `(n² − in)! / (n − i)!^n`: ways to fill the rest once `i` rows are fixed.
fn fill_after_rows(n: i64, i: i64) -> BigUint {
    factorial_ratio(&[n * n - i * n], &[(n - i, n as u32)])
}

fn pow_neg2(k: i64) -> BigInt {
    let mag = BigInt::one() << (k as usize);
    if k % 2 == 0 {
        mag
    } else {
        -mag
    }
}

/// `Σ_{k=0}^{n−x} (−2)^k C(n−x, k) (n² − nx − nk)! / (n − x − k)!^n`:
/// arrangements with exactly the `x` chosen rows consecutive among the rows.
fn exactly_these_rows(n: i64, x: i64) -> BigInt {
    (0..=(n - x))
        .map(|k| {
            pow_neg2(k)
                * signed(binomial(n - x, k))
                * signed(factorial_ratio(&[n * n - n * x - n * k], &[(n - x - k, n as u32)]))
        })
        .sum()
}

/// `|Ωₙ| = (n²)! / n!ⁿ`.
pub fn count_all(n: u32) -> ExactCount {
    let n = check_order(n, 1);
    ExactCount::new(factorial_ratio(&[n * n], &[(n, n as u32)]))
}

/// `|R|`, squares with at least one consecutive or reverse-consecutive row.
pub fn count_row_consecutive(n: u32) -> ExactCount {
    let nn = check_order(n, 2);
    let total: BigInt = (1..=nn)
        .map(|i| {
            let sign = if i % 2 == 1 { BigInt::one() } else { -BigInt::one() };
            let term = factorial_ratio(&[nn, nn * nn - i * nn], &[(nn - i, (nn + 1) as u32), (i, 1)]);
            sign * (BigInt::one() << (i as usize)) * signed(term)
        })
        .sum();
    unsigned(total, "|R|", n)
}

/// `M = |R_{(n+1)/2} ∩ C|`; zero for even `n`.
pub fn count_middle_row_and_column(n: u32) -> ExactCount {
    let n = check_order(n, 2);
    ExactCount::new(cross_one(n) * (4 * indicator_even(n + 1)))
}

/// `|Rᵢ ∩ Cᵢ|`
pub fn count_rc(n: u32) -> ExactCount {
    let n = check_order(n, 2);
    ExactCount::new(cross_one(n) * 2u32)
}

/// `|Rᵢ ∩ Cᵢ ∩ Cᵢ′|`
pub fn count_rcc(n: u32) -> ExactCount {
    let n = check_order(n, 2);
    ExactCount::new(cross_two(n) * 2u32)
}

/// `|Rᵢ ∩ Rᵢ′ ∩ Cᵢ ∩ Cᵢ′|`
pub fn count_rrcc(n: u32) -> ExactCount {
    let n = check_order(n, 2);
    ExactCount::new(cross_four(n) * 2u32)
}

fn sigma_signed(n: i64) -> BigInt {
    let half = n / 2;
    let head: BigInt = (1..=n)
        .map(|i| pow_neg2(i + 1) * signed(binomial(n, i)) * signed(fill_after_rows(n, i)))
        .sum();
    head - BigInt::from(4 * n) * signed(cross_one(n)) + BigInt::from(8 * half) * signed(cross_two(n))
        - BigInt::from(2 * half) * signed(cross_four(n))
}

/// `|Σₙ|`, the number of consecutive equi-n-squares, by the closed form.
pub fn count_consecutive(n: u32) -> ExactCount {
    let nn = check_order(n, 2);
    unsigned(sigma_signed(nn), "|Σₙ|", n)
}

/// `|Σₙ|` assembled from the lemma counts through the inclusion-exclusion
/// chain `2|R| − (M + 2Σ(2|RᵢCᵢ| − |RᵢCᵢCᵢ′|) − Σ(2|RᵢRᵢ′Cᵢ| − |RᵢRᵢ′CᵢCᵢ′|))`,
/// using `|RᵢRᵢ′Cᵢ| = |RᵢCᵢCᵢ′|` (quarter-turn bijection). An independent
/// algebraic route to [`count_consecutive`].
pub fn count_consecutive_via_lemmas(n: u32) -> ExactCount {
    let half = BigInt::from(n / 2);
    let r = count_row_consecutive(n).to_bigint();
    let m = count_middle_row_and_column(n).to_bigint();
    let rc = count_rc(n).to_bigint();
    let rcc = count_rcc(n).to_bigint();
    let rrcc = count_rrcc(n).to_bigint();
    let two = BigInt::from(2);
    let row_and_col = m + &two * &half * (&two * &rc - &rcc) - &half * (&two * &rcc - &rrcc);
    unsigned(two * r - row_and_col, "|Σₙ| via lemmas", n)
}

/// `S(n) = 4n (n² − n)! / (n − 1)!ⁿ`, the leading-term approximation of `|Σₙ|`.
pub fn asymptotic_sigma(n: u32) -> ExactCount {
    let nn = check_order(n, 2);
    ExactCount::new(factorial_ratio(&[nn * nn - nn], &[(nn - 1, n)]) * (4 * n))
}

/// `P(ω ∈ Σₙ) = |Σₙ| / |Ωₙ|`.
pub fn prob_consecutive(n: u32) -> ExactProb {
    ExactProb::ratio(count_consecutive(n).value(), count_all(n).value())
}

/// `4 n^(n+1) (n² − n)! / (n²)!`. Not clamped: exceeds 1 at `n = 2`.
pub fn prob_consecutive_asymptotic(n: u32) -> ExactProb {
    let nn = check_order(n, 2);
    let num = BigUint::from(n).pow(n + 1) * factorial_unsigned((nn * nn - nn) as usize) * 4u32;
    ExactProb::ratio(&num, &factorial_unsigned((nn * nn) as usize))
}

/// Upper bound `4n / (n − 1)ⁿ` closing the rarity argument.
pub fn prob_consecutive_rarity_bound(n: u32) -> ExactProb {
    check_order(n, 2);
    ExactProb::ratio(&BigUint::from(4 * n), &BigUint::from(n - 1).pow(n))
}

/// `|Ωₙ| · p_{Xₙ}(x)`: the signed count each case formula produces.
///
/// Exact at `n = 3` only. At `n = 2` the formulas are degenerate and the
/// `x = 1` value is negative. From `n = 4` on the `x = 2` case over-counts
/// (144 squares at `n = 4`, 241 920 at `n = 5`) and `x = 1` under-counts by
/// the same amount; other values are right. Both are reported as-is; the
/// true distribution is [`crate::oracle::line_distribution`].
pub fn pmf_count(n: u32, x: u32) -> BigInt {
    let nn = check_order(n, 2);
    let x = i64::from(x);
    let even = i64::from(indicator_even(nn));
    let half = nn / 2;
    let c1 = signed(cross_one(nn));
    let c2 = signed(cross_two(nn));
    let c4 = signed(cross_four(nn));
    let b = |v: i64| BigInt::from(v);
    // (n + 𝟏(n) − 1): admissible choices of the first crossing row.
    let rows_off_middle = b(nn + even - 1);
    match x {
        0 => signed(count_all(n).into_inner()) - sigma_signed(nn),
        1 => {
            let head: BigInt = (1..=nn)
                .map(|i| {
                    pow_neg2(i + 1) * signed(binomial(nn - 1, i - 1)) * signed(fill_after_rows(nn, i))
                })
                .sum();
            b(nn) * head - b(8 * nn) * &c1 + b(8 * (even + nn + half - 1)) * &c2
                - b(9 * even + 9 * nn + 2 * half - 9) * &c4
        }
        2 => {
            b(4 * nn) * &c1 + b(8) * signed(binomial(nn, 2)) * exactly_these_rows(nn, 2)
                - b(3) * (b(4) * &rows_off_middle * &c2 - b(4) * &rows_off_middle * &c4)
        }
        3 => {
            b(16) * signed(binomial(nn, 3)) * exactly_these_rows(nn, 3)
                + b(4) * &rows_off_middle * &c2
                - b(4) * &rows_off_middle * &c4
        }
        4 => b(32) * signed(binomial(nn, 4)) * exactly_these_rows(nn, 4) + &rows_off_middle * &c4,
        _ => (BigInt::one() << ((x + 1) as usize)) * signed(binomial(nn, x)) * exactly_these_rows(nn, x),
    }
}

/// `p_{Xₙ}(x)`, the probability that a uniform square has exactly `x`
/// consecutive or reverse-consecutive lines.
pub fn pmf(n: u32, x: u32) -> ExactProb {
    ExactProb::from_rational(num_rational::BigRational::new(
        pmf_count(n, x),
        count_all(n).to_bigint(),
    ))
}

/// Exact distribution of `Xₙ` over `x ∈ {0, …, max(n, 4)}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmfTable {
    pub n: u32,
    pub entries: Vec<ExactProb>,
    /// Smallest `x` from which every entry is zero.
    pub tail_zero_from: u32,
}

impl PmfTable {
    pub fn support_max(&self) -> u32 {
        self.entries.len() as u32 - 1
    }

    pub fn get(&self, x: u32) -> ExactProb {
        self.entries
            .get(x as usize)
            .cloned()
            .unwrap_or_else(ExactProb::zero)
    }

    /// `P(Xₙ ≥ x)`.
    pub fn tail(&self, x: u32) -> ExactProb {
        self.entries.iter().skip(x as usize).cloned().sum()
    }

    pub fn total(&self) -> ExactProb {
        self.entries.iter().cloned().sum()
    }
}

pub fn pmf_table(n: u32) -> Result<PmfTable, CountingError> {
    check_order(n, 2);
    let top = n.max(4);
    let entries: Vec<ExactProb> = (0..=top).map(|x| pmf(n, x)).collect();
    let inconsistency = |detail: String| CountingError::FormulaInconsistency { n, detail };
    for x in (top + 1)..=(2 * n + 1) {
        let v = pmf_count(n, x);
        if !v.is_zero() {
            return Err(inconsistency(format!("case formula gives {v} at x = {x} beyond support")));
        }
    }
    let total: ExactProb = entries.iter().cloned().sum();
    if total != ExactProb::one() {
        return Err(inconsistency(format!("entries sum to {total}, not 1")));
    }
    let tail_zero_from = entries
        .iter()
        .rposition(|p| !p.is_zero())
        .map_or(0, |i| i as u32 + 1);
    Ok(PmfTable {
        n,
        entries,
        tail_zero_from,
    })
}

/// Every lemma-level quantity for one order.
#[derive(Debug, Clone, PartialEq)]
pub struct CountBreakdown {
    pub n: u32,
    pub omega: ExactCount,
    pub sigma: ExactCount,
    pub r: ExactCount,
    pub m_term: ExactCount,
    pub rc: ExactCount,
    pub rcc: ExactCount,
    pub rrcc: ExactCount,
    pub s_asymptotic: ExactCount,
    pub s_asymptotic_ln: LogApprox,
    pub prob_consecutive: ExactProb,
}

impl CountBreakdown {
    pub fn compute(n: u32) -> Self {
        let omega = count_all(n);
        let sigma = count_consecutive(n);
        let s_asymptotic = asymptotic_sigma(n);
        let prob_consecutive = ExactProb::ratio(sigma.value(), omega.value());
        Self {
            n,
            r: count_row_consecutive(n),
            m_term: count_middle_row_and_column(n),
            rc: count_rc(n),
            rcc: count_rcc(n),
            rrcc: count_rrcc(n),
            s_asymptotic_ln: s_asymptotic.ln(),
            s_asymptotic,
            prob_consecutive,
            omega,
            sigma,
        }
    }

    /// `|Σₙ| / S(n)` exactly.
    pub fn sigma_ratio(&self) -> ExactProb {
        ExactProb::ratio(self.sigma.value(), self.s_asymptotic.value())
    }
}

/// Elementary Latin-square bounds from the permutation-line statistic `Yₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatinBounds {
    pub n: u32,
    /// `E(Yₙ)`; an expectation, may exceed 1.
    pub expected_y: ExactProb,
    /// Markov bound on `P(Yₙ = 2n)`.
    pub markov_prob_bound: ExactProb,
    /// `ln(n! (n² − n)! / (n − 1)!ⁿ)`
    pub ln_trivial_bound: LogApprox,
    /// `ln ∏_{k=1}^{n} (k!)^(n/k)`
    pub ln_vlw_bound: LogApprox,
}

pub fn latin_bounds(n: u32) -> LatinBounds {
    let nn = check_order(n, 2);
    // Squares with one given line a permutation: n! (n² − n)! / (n − 1)!ⁿ.
    let per_line = factorial_ratio(&[nn, nn * nn - nn], &[(nn - 1, n)]);
    let omega = count_all(n);
    let expected_y = ExactProb::ratio(&(&per_line * (2 * n)), omega.value());
    let markov_prob_bound = &expected_y / &ExactProb::integer(2 * nn);
    let ln_vlw = (1..=u64::from(n))
        .map(|k| LogApprox::ln_factorial(k).log_value * f64::from(n) / k as f64)
        .sum();
    LatinBounds {
        n,
        expected_y,
        markov_prob_bound,
        ln_trivial_bound: LogApprox::of_biguint(&per_line),
        ln_vlw_bound: LogApprox::from_ln(ln_vlw),
    }
}

/// For a uniform Latin square of order `n`: the expected number of
/// consecutive or reverse-consecutive lines, `2n/n!`, and the Markov bound
/// `n/n!` on having at least two of them.
pub fn expected_consecutive_latin(n: u32) -> (ExactProb, ExactProb) {
    let nn = check_order(n, 2);
    let fact = factorial_unsigned(nn as usize);
    (
        ExactProb::ratio(&BigUint::from(2 * n), &fact),
        ExactProb::ratio(&BigUint::from(n), &fact),
    )
}

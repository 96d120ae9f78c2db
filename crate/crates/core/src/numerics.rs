//! Exact big-number kernels shared by the counting, oracle and simulation
//! code.
//!
//! Closed forms in this crate are evaluated verbatim, including at small
//! orders where some factorial arguments go negative. A negative factorial is
//! represented by [`Factorial::ZeroReciprocal`]: the reciprocal gamma function
//! vanishes at non-positive integers, so any term carrying such a factor in a
//! denominator (with a positive exponent) evaluates to zero. A zero-th power
//! of that factor is the empty product and contributes 1.
//!
//! The indicator `𝟏_{2ℕ}` follows the convention that `0 ∈ 2ℕ`; see
//! [`indicator_even`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{LazyLock, RwLock};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumericsError {
    #[error("factorial of negative argument {0} appears in a numerator")]
    NegativeNumeratorFactorial(i64),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("factorial ratio is not an integer")]
    NonIntegralRatio,
}

// Append-only memo; index k holds k!.
static FACTORIALS: LazyLock<RwLock<Vec<BigUint>>> =
    LazyLock::new(|| RwLock::new(vec![BigUint::one()]));

/// Result of [`factorial`]: either the value `k!` or the marker for a
/// negative argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Factorial {
    Value(BigUint),
    ZeroReciprocal,
}

impl Factorial {
    pub fn value(&self) -> Option<&BigUint> {
        match self {
            Factorial::Value(v) => Some(v),
            Factorial::ZeroReciprocal => None,
        }
    }

    pub fn is_zero_reciprocal(&self) -> bool {
        matches!(self, Factorial::ZeroReciprocal)
    }
}

/// `k!` for `k ≥ 0`, [`Factorial::ZeroReciprocal`] for `k < 0`.
pub fn factorial(k: i64) -> Factorial {
    if k < 0 {
        return Factorial::ZeroReciprocal;
    }
    Factorial::Value(factorial_unsigned(k as usize))
}

pub(crate) fn factorial_unsigned(k: usize) -> BigUint {
    {
        let memo = FACTORIALS.read().expect("factorial memo poisoned");
        if let Some(v) = memo.get(k) {
            return v.clone();
        }
    }
    let mut memo = FACTORIALS.write().expect("factorial memo poisoned");
    while memo.len() <= k {
        let next = memo.last().expect("memo never empty") * BigUint::from(memo.len());
        memo.push(next);
    }
    memo[k].clone()
}

/// `n!/(k!(n−k)!)` for `0 ≤ k ≤ n`, zero otherwise.
pub fn binomial(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 || k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `𝟏_{2ℕ}(n)`: 1 when `n` is even (zero included), else 0.
pub fn indicator_even(n: i64) -> u32 {
    u32::from(n.rem_euclid(2) == 0)
}

/// Evaluates `∏ numer[i]! / ∏ denom[j].0!^denom[j].1` exactly.
///
/// A negative factorial in the denominator with a positive exponent makes the
/// whole term zero. A negative factorial in the numerator is an error. The
/// quotient must be an integer.
pub fn try_factorial_ratio(numer: &[i64], denom: &[(i64, u32)]) -> Result<BigUint, NumericsError> {
    if let Some(&bad) = numer.iter().find(|&&k| k < 0) {
        return Err(NumericsError::NegativeNumeratorFactorial(bad));
    }
    if denom.iter().any(|&(k, p)| k < 0 && p > 0) {
        return Ok(BigUint::zero());
    }
    let top = numer
        .iter()
        .fold(BigUint::one(), |acc, &k| acc * factorial_unsigned(k as usize));
    let bottom = denom
        .iter()
        .filter(|&&(_, p)| p > 0)
        .fold(BigUint::one(), |acc, &(k, p)| {
            acc * factorial_unsigned(k as usize).pow(p)
        });
    let (q, r) = top.div_rem(&bottom);
    if !r.is_zero() {
        return Err(NumericsError::NonIntegralRatio);
    }
    Ok(q)
}

/// Panicking form of [`try_factorial_ratio`] for formula code whose domains
/// never put a negative factorial in a numerator.
pub fn factorial_ratio(numer: &[i64], denom: &[(i64, u32)]) -> BigUint {
    try_factorial_ratio(numer, denom)
        .unwrap_or_else(|e| panic!("formula evaluated outside its domain: {e}"))
}

/// A nonnegative arbitrary-precision count.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ExactCount(BigUint);

impl ExactCount {
    pub fn new(value: BigUint) -> Self {
        Self(value)
    }

    /// Converts a signed sum, failing if it is negative.
    pub fn from_signed(value: BigInt) -> Option<Self> {
        value.to_biguint().map(Self)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_inner(self) -> BigUint {
        self.0
    }

    pub fn to_bigint(&self) -> BigInt {
        BigInt::from(self.0.clone())
    }

    pub fn to_scientific(&self, sig: usize) -> Scientific {
        to_scientific(&BigRational::from_integer(self.to_bigint()), sig, Rounding::HalfEven)
    }

    pub fn ln(&self) -> LogApprox {
        LogApprox::of_biguint(&self.0)
    }
}

impl From<BigUint> for ExactCount {
    fn from(v: BigUint) -> Self {
        Self(v)
    }
}

impl From<u64> for ExactCount {
    fn from(v: u64) -> Self {
        Self(BigUint::from(v))
    }
}

impl fmt::Display for ExactCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An exact rational, always stored in lowest terms with a positive
/// denominator.
///
/// Used for probabilities but not clamped to `[0, 1]`: expectations and
/// asymptotic ratios share the type, and [`ExactProb::is_probability`] reports
/// whether the value lies in range.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactProb(BigRational);

impl ExactProb {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Result<Self, NumericsError> {
        let denom = denom.into();
        if denom.is_zero() {
            return Err(NumericsError::ZeroDenominator);
        }
        Ok(Self(BigRational::new(numer.into(), denom)))
    }

    pub fn ratio(numer: &BigUint, denom: &BigUint) -> Self {
        Self::new(numer.clone(), denom.clone()).expect("nonzero denominator")
    }

    pub fn from_rational(r: BigRational) -> Self {
        Self(r)
    }

    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    pub fn integer(v: i64) -> Self {
        Self(BigRational::from_integer(v.into()))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_probability(&self) -> bool {
        !self.0.is_negative() && self.0 <= BigRational::one()
    }

    pub fn to_f64(&self) -> f64 {
        // Route through logs so huge numerators and denominators don't
        // overflow an f64 conversion.
        if self.0.is_zero() {
            return 0.0;
        }
        let sign = if self.0.is_negative() { -1.0 } else { 1.0 };
        let num = self.0.numer().magnitude();
        let den = self.0.denom().magnitude();
        match (num.to_f64(), den.to_f64()) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() && b > 0.0 => sign * a / b,
            _ => sign * (ln_biguint(num) - ln_biguint(den)).exp(),
        }
    }

    pub fn to_decimal(&self, digits: usize) -> String {
        to_decimal(self, digits)
    }

    pub fn to_scientific(&self, sig: usize) -> Scientific {
        to_scientific(&self.0, sig, Rounding::HalfEven)
    }

    /// `self^k` for a nonnegative exponent.
    pub fn pow(&self, k: u32) -> Self {
        Self(num_traits::pow(self.0.clone(), k as usize))
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for ExactProb {
            type Output = ExactProb;
            fn $method(self, rhs: ExactProb) -> ExactProb {
                ExactProb(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a ExactProb> for &'a ExactProb {
            type Output = ExactProb;
            fn $method(self, rhs: &'a ExactProb) -> ExactProb {
                ExactProb((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for ExactProb {
    type Output = ExactProb;
    fn neg(self) -> ExactProb {
        ExactProb(-self.0)
    }
}

impl std::iter::Sum for ExactProb {
    fn sum<I: Iterator<Item = ExactProb>>(iter: I) -> Self {
        iter.fold(ExactProb::zero(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    /// Round half to even.
    HalfEven,
    /// Truncate toward zero.
    TowardZero,
}

fn round_quotient(numer: &BigUint, denom: &BigUint, mode: Rounding) -> BigUint {
    let (q, r) = numer.div_rem(denom);
    match mode {
        Rounding::TowardZero => q,
        Rounding::HalfEven => match (r << 1u32).cmp(denom) {
            Ordering::Greater => q + 1u32,
            Ordering::Equal if q.is_odd() => q + 1u32,
            _ => q,
        },
    }
}

/// Fixed-point rendering with `digits` places after the decimal point,
/// rounded half-to-even.
pub fn to_decimal(p: &ExactProb, digits: usize) -> String {
    to_decimal_with(p.as_rational(), digits, Rounding::HalfEven)
}

pub fn to_decimal_with(v: &BigRational, digits: usize, mode: Rounding) -> String {
    let scale = BigUint::from(10u32).pow(digits as u32);
    let num = v.numer().magnitude() * &scale;
    let q = round_quotient(&num, v.denom().magnitude(), mode);
    let mut s = q.to_string();
    if s.len() <= digits {
        s = format!("{}{}", "0".repeat(digits + 1 - s.len()), s);
    }
    let (int, frac) = s.split_at(s.len() - digits);
    let sign = if v.is_negative() && !q.is_zero() { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// A decimal value rounded to a fixed number of significant digits:
/// `mantissa × 10^exponent` with `1 ≤ |mantissa| < 10`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scientific {
    pub negative: bool,
    /// Significant digits, leading digit first, no decimal point.
    pub digits: String,
    pub exponent: i64,
}

impl Scientific {
    pub fn mantissa(&self) -> String {
        let sign = if self.negative { "-" } else { "" };
        let (head, tail) = self.digits.split_at(1);
        if tail.is_empty() {
            format!("{sign}{head}")
        } else {
            format!("{sign}{head}.{tail}")
        }
    }

    /// Plain positional rendering of the same digits, e.g. `0.0097599064`.
    pub fn positional(&self) -> String {
        let sign = if self.negative { "-" } else { "" };
        let d = &self.digits;
        let e = self.exponent;
        if e < 0 {
            format!("{sign}0.{}{}", "0".repeat((-e - 1) as usize), d)
        } else if (e as usize) + 1 >= d.len() {
            format!("{sign}{}{}", d, "0".repeat(e as usize + 1 - d.len()))
        } else {
            let (a, b) = d.split_at(e as usize + 1);
            format!("{sign}{a}.{b}")
        }
    }
}

impl fmt::Display for Scientific {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}e{}", self.mantissa(), self.exponent)
    }
}

fn decimal_exponent(num: &BigUint, den: &BigUint) -> i64 {
    // floor(log10(num/den)), starting from a digit-count estimate.
    let ten = BigUint::from(10u32);
    let mut e = num.to_string().len() as i64 - den.to_string().len() as i64;
    loop {
        // Want 10^e ≤ num/den < 10^(e+1).
        let (lhs, rhs) = if e >= 0 {
            (num.clone(), den * ten.pow(e as u32))
        } else {
            (num * ten.pow((-e) as u32), den.clone())
        };
        if lhs < rhs {
            e -= 1;
            continue;
        }
        if lhs >= rhs * &ten {
            e += 1;
            continue;
        }
        return e;
    }
}

/// Rounds `v` to `sig` significant digits (`sig ≥ 1`).
pub fn to_scientific(v: &BigRational, sig: usize, mode: Rounding) -> Scientific {
    assert!(sig >= 1, "at least one significant digit");
    if v.is_zero() {
        return Scientific {
            negative: false,
            digits: "0".repeat(sig),
            exponent: 0,
        };
    }
    let num = v.numer().magnitude();
    let den = v.denom().magnitude();
    let ten = BigUint::from(10u32);
    let mut exponent = decimal_exponent(num, den);
    let shift = sig as i64 - 1 - exponent;
    let (n, d) = if shift >= 0 {
        (num * ten.pow(shift as u32), den.clone())
    } else {
        (num.clone(), den * ten.pow((-shift) as u32))
    };
    let mut q = round_quotient(&n, &d, mode);
    if q == ten.pow(sig as u32) {
        q /= 10u32;
        exponent += 1;
    }
    Scientific {
        negative: v.is_negative(),
        digits: q.to_string(),
        exponent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogSign {
    Positive,
    Zero,
}

/// Natural logarithm of a nonnegative quantity too large for `f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogApprox {
    pub log_value: f64,
    pub sign: LogSign,
}

fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_f64().expect("64-bit value fits f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

impl LogApprox {
    pub fn zero() -> Self {
        Self {
            log_value: f64::NEG_INFINITY,
            sign: LogSign::Zero,
        }
    }

    pub fn from_ln(log_value: f64) -> Self {
        Self {
            log_value,
            sign: LogSign::Positive,
        }
    }

    pub fn of_biguint(x: &BigUint) -> Self {
        if x.is_zero() {
            Self::zero()
        } else {
            Self::from_ln(ln_biguint(x))
        }
    }

    /// Logarithm of a nonnegative rational; `None` if negative.
    pub fn of_rational(r: &BigRational) -> Option<Self> {
        match r.numer().sign() {
            Sign::Minus => None,
            Sign::NoSign => Some(Self::zero()),
            Sign::Plus => Some(Self::from_ln(
                ln_biguint(r.numer().magnitude()) - ln_biguint(r.denom().magnitude()),
            )),
        }
    }

    pub fn ln_factorial(k: u64) -> Self {
        Self::of_biguint(&factorial_unsigned(k as usize))
    }

    pub fn is_zero(&self) -> bool {
        self.sign == LogSign::Zero
    }

    /// Log of the product of two quantities.
    pub fn product(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            Self::zero()
        } else {
            Self::from_ln(self.log_value + other.log_value)
        }
    }

    /// Log of the quantity raised to a real power.
    pub fn powf(self, e: f64) -> Self {
        if self.is_zero() {
            Self::zero()
        } else {
            Self::from_ln(self.log_value * e)
        }
    }

    pub fn exp(self) -> f64 {
        match self.sign {
            LogSign::Zero => 0.0,
            LogSign::Positive => self.log_value.exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn factorial_small_values() {
        assert_eq!(factorial(0), Factorial::Value(BigUint::one()));
        assert_eq!(factorial(5), Factorial::Value(BigUint::from(120u32)));
        assert!(factorial(-1).is_zero_reciprocal());
        assert!(factorial(-7).is_zero_reciprocal());
    }

    #[test]
    fn factorial_recurrence() {
        for k in 1..200i64 {
            let a = factorial(k).value().cloned().unwrap();
            let b = factorial(k - 1).value().cloned().unwrap();
            assert_eq!(a, b * BigUint::from(k as u64));
        }
    }

    #[test]
    fn memo_is_thread_safe() {
        let handles: Vec<_> = (0..8)
            .map(|t| std::thread::spawn(move || factorial_unsigned(300 + t * 17)))
            .collect();
        for (t, h) in handles.into_iter().enumerate() {
            let got = h.join().unwrap();
            let expect = (1..=(300 + t * 17) as u64).fold(BigUint::one(), |a, i| a * i);
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn binomial_cases() {
        assert_eq!(binomial(4, 2), BigUint::from(6u32));
        for n in 0..10 {
            assert_eq!(binomial(n, 0), BigUint::one());
        }
        assert_eq!(binomial(3, 5), BigUint::zero());
        assert_eq!(binomial(3, -1), BigUint::zero());
        assert_eq!(binomial(-2, 1), BigUint::zero());
        assert_eq!(binomial(81, 40), {
            let f = |k: usize| factorial_unsigned(k);
            f(81) / (f(40) * f(41))
        });
    }

    #[test]
    fn indicator_even_includes_zero() {
        assert_eq!(indicator_even(4), 1);
        assert_eq!(indicator_even(7), 0);
        assert_eq!(indicator_even(0), 1);
    }

    #[test]
    fn zero_reciprocal_in_denominator_vanishes() {
        // The (n-4)! term at n = 3: 2(n²-4n+4)!/((n-2)!²(n-4)!^(n-2)).
        let n = 3i64;
        let t = factorial_ratio(&[n * n - 4 * n + 4], &[(n - 2, 2), (n - 4, (n - 2) as u32)]);
        assert!(t.is_zero());
    }

    #[test]
    fn zero_reciprocal_to_zeroth_power_is_one() {
        // n = 2: (n-4)!^(n-2) = (-2)!^0, the empty product.
        let n = 2i64;
        let t = factorial_ratio(&[n * n - 4 * n + 4], &[(n - 2, 2), (n - 4, 0)]);
        assert_eq!(t, BigUint::one());
    }

    #[test]
    fn zero_reciprocal_in_numerator_is_an_error() {
        assert_eq!(
            try_factorial_ratio(&[-1], &[(2, 1)]),
            Err(NumericsError::NegativeNumeratorFactorial(-1))
        );
    }

    #[test]
    #[should_panic(expected = "outside its domain")]
    fn factorial_ratio_asserts_domain() {
        factorial_ratio(&[-3], &[]);
    }

    #[test]
    fn non_integral_ratio_detected() {
        assert_eq!(
            try_factorial_ratio(&[2], &[(3, 1)]),
            Err(NumericsError::NonIntegralRatio)
        );
    }

    #[test]
    fn decimal_rendering() {
        let p = ExactProb::new(824, 1680).unwrap();
        assert_eq!(p.to_decimal(8), "0.49047619");
        assert_eq!(ExactProb::one().to_decimal(3), "1.000");
        assert_eq!(ExactProb::new(6, 16).unwrap().to_decimal(3), "0.375");
    }

    #[test]
    fn decimal_rounds_half_to_even() {
        assert_eq!(ExactProb::new(1, 8).unwrap().to_decimal(2), "0.12");
        assert_eq!(ExactProb::new(3, 8).unwrap().to_decimal(2), "0.38");
        assert_eq!(ExactProb::new(5, 2).unwrap().to_decimal(0), "2");
        assert_eq!(ExactProb::new(7, 2).unwrap().to_decimal(0), "4");
        assert_eq!(ExactProb::new(-1, 3).unwrap().to_decimal(3), "-0.333");
        assert_eq!(
            to_decimal_with(&BigRational::new(2.into(), 3.into()), 2, Rounding::TowardZero),
            "0.66"
        );
    }

    #[test]
    fn scientific_rendering() {
        let s = to_scientific(
            &BigRational::new(5676040.into(), 1.into()),
            3,
            Rounding::HalfEven,
        );
        assert_eq!(s.to_string(), "5.68e6");
        let s = to_scientific(&BigRational::new(1.into(), 3.into()), 4, Rounding::HalfEven);
        assert_eq!(s.to_string(), "3.333e-1");
        assert_eq!(s.positional(), "0.3333");
        // Carry into a new decade.
        let s = to_scientific(&BigRational::new(9999.into(), 1.into()), 2, Rounding::HalfEven);
        assert_eq!(s.to_string(), "1.0e4");
        let s = to_scientific(&BigRational::new(7.into(), 1000.into()), 1, Rounding::HalfEven);
        assert_eq!(s.positional(), "0.007");
        let s = to_scientific(&BigRational::new(1.into(), 1.into()), 1, Rounding::HalfEven);
        assert_eq!(s.positional(), "1");
    }

    #[test]
    fn ln_factorial_matches_log_sum() {
        for k in [0u64, 1, 2, 10, 170, 171, 1000, 5000, 10_000] {
            let oracle: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
            let got = LogApprox::ln_factorial(k).log_value;
            if k < 2 {
                assert_eq!(got, 0.0);
            } else {
                assert!(((got - oracle) / oracle).abs() < 1e-12, "k={k} {got} {oracle}");
            }
        }
    }

    #[test]
    fn ln_reproduces_exact_value() {
        let x = factorial_unsigned(20);
        let v = LogApprox::of_biguint(&x).exp();
        let exact = x.to_f64().unwrap();
        assert!(((v - exact) / exact).abs() < 1e-12);
        assert!(LogApprox::of_biguint(&BigUint::zero()).is_zero());
    }

    #[test]
    fn to_f64_handles_huge_operands() {
        let big = factorial_unsigned(400);
        let p = ExactProb::ratio(&big, &(&big * 4u32));
        assert!((p.to_f64() - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rational_addition_is_exact(
            a in any::<i128>(), b in 1u128.., c in any::<i128>(), d in 1u128..
        ) {
            let lhs = ExactProb::new(a, b).unwrap() + ExactProb::new(c, d).unwrap();
            let num = BigInt::from(a) * BigInt::from(d) + BigInt::from(c) * BigInt::from(b);
            let den = BigInt::from(b) * BigInt::from(d);
            // lhs is reduced and cross-multiplies to the unreduced sum.
            prop_assert_eq!(lhs.numer() * &den, num * lhs.denom());
            prop_assert!(lhs.denom() > &BigInt::zero());
            prop_assert!(lhs.numer().gcd(lhs.denom()).is_one());
        }
    }
}

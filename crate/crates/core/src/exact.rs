//! Exact arithmetic over the field Q[sqrt(2)].
//!
//! Every position, length and threshold in this crate is a [`QuadScalar`],
//! a number of the form `a + b*sqrt(2)` with arbitrary-precision rational
//! coefficients. Ordering, floor and equality are decided exactly: a
//! floating-point estimate with a rigorous error bound settles the easy
//! cases, and anything the bound cannot certify falls back to symbolic
//! arithmetic, so no decision ever depends on rounding.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::CircleError;

/// Arbitrary-precision rational, always in lowest terms with positive denominator.
pub type Rational = BigRational;

/// Parse a rational from `num/den` or a plain integer string.
pub fn parse_rational(s: &str) -> Result<Rational, CircleError> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let num: BigInt = num
        .trim()
        .parse()
        .map_err(|_| CircleError::Parse(format!("bad rational numerator in {s:?}")))?;
    let den: BigInt = den
        .trim()
        .parse()
        .map_err(|_| CircleError::Parse(format!("bad rational denominator in {s:?}")))?;
    if den.is_zero() {
        return Err(CircleError::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(num, den))
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// An exact element of Q[sqrt(2)]: the value `a + b*sqrt(2)`.
///
/// The pair (a, b) is a unique representation since sqrt(2) is irrational.
/// `PartialEq`/`Hash` derive from the coefficients, which therefore agree
/// with equality of real values.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuadScalar {
    a: Rational,
    b: Rational,
}

impl QuadScalar {
    pub fn new(a: Rational, b: Rational) -> Self {
        QuadScalar { a, b }
    }

    pub fn from_rational(a: Rational) -> Self {
        QuadScalar { a, b: Rational::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(Rational::from(BigInt::from(n)))
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    /// The value sqrt(2).
    pub fn sqrt2() -> Self {
        QuadScalar { a: Rational::zero(), b: Rational::one() }
    }

    pub fn rational_part(&self) -> &Rational {
        &self.a
    }

    pub fn sqrt2_part(&self) -> &Rational {
        &self.b
    }

    /// True iff the value lies in Q, i.e. the sqrt(2) coefficient vanishes.
    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        if self.is_rational() {
            Some(&self.a)
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// Sign of `a + b*sqrt(2)`, decided symbolically.
    ///
    /// When the coefficient signs disagree, the sign is that of `a^2 - 2b^2`
    /// flipped to match the dominant term: for `a > 0 > b` the value is
    /// positive iff `a^2 > 2b^2`, and symmetrically for `a < 0 < b`.
    pub fn sign(&self) -> Ordering {
        let sa = rational_sign(&self.a);
        let sb = rational_sign(&self.b);
        match (sa, sb) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (Ordering::Greater, Ordering::Greater) => Ordering::Greater,
            (Ordering::Less, Ordering::Less) => Ordering::Less,
            (Ordering::Greater, Ordering::Less) | (Ordering::Less, Ordering::Greater) => {
                let af = self.a.to_f64().unwrap_or(f64::NAN);
                let bf = self.b.to_f64().unwrap_or(f64::NAN);
                if let Some(s) = float_sign(af, bf) {
                    return s;
                }
                // compare a^2 with 2 b^2; equality would force a = b = 0
                let aa = &self.a * &self.a;
                let bb2 = &self.b * &self.b * Rational::from(BigInt::from(2));
                match aa.cmp(&bb2) {
                    Ordering::Greater => sa,
                    Ordering::Less => sb,
                    Ordering::Equal => Ordering::Equal,
                }
            }
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign() == Ordering::Greater
    }

    pub fn is_negative(&self) -> bool {
        self.sign() == Ordering::Less
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn mul_rat(&self, c: &Rational) -> Self {
        QuadScalar { a: &self.a * c, b: &self.b * c }
    }

    /// Exact multiplicative inverse. Errors on zero.
    pub fn recip(&self) -> Result<Self, CircleError> {
        if self.is_zero() {
            return Err(CircleError::Usage("division by zero".into()));
        }
        // 1/(a + b sqrt2) = (a - b sqrt2) / (a^2 - 2 b^2)
        let norm = &self.a * &self.a - &self.b * &self.b * Rational::from(BigInt::from(2));
        debug_assert!(!norm.is_zero());
        Ok(QuadScalar { a: &self.a / &norm, b: -&self.b / &norm })
    }

    pub fn div(&self, other: &Self) -> Result<Self, CircleError> {
        Ok(self.clone() * other.recip()?)
    }

    /// Greatest integer n with n <= self, decided exactly.
    pub fn floor(&self) -> BigInt {
        // start from a cheap estimate and correct by exact comparison
        let t = self.to_f64();
        let mut n = if t.is_finite() && t.abs() < 9.0e15 {
            BigInt::from(t.floor() as i64)
        } else {
            self.a.floor().to_integer() + floor_rat_sqrt2(&self.b)
        };
        loop {
            let next = QuadScalar::from_rational(Rational::from(&n + 1));
            if self >= &next {
                n += 1;
                continue;
            }
            let cur = QuadScalar::from_rational(Rational::from(n.clone()));
            if self < &cur {
                n -= 1;
                continue;
            }
            return n;
        }
    }

    pub fn ceil(&self) -> BigInt {
        let f = self.floor();
        if self == &QuadScalar::from_rational(Rational::from(f.clone())) {
            f
        } else {
            f + 1
        }
    }

    /// Round each coefficient down to a multiple of 2^-m. The result is at
    /// most (1 + sqrt2) / 2^m below the exact value and has dyadic
    /// coefficients, which keeps long chains of derived positions from
    /// accumulating ever larger denominators.
    pub fn snap_dyadic(&self, m: u32) -> Self {
        use num_integer::Integer;
        let scale = BigInt::from(1) << m;
        let snap_rat = |r: &Rational| {
            Rational::new((r.numer() << m).div_floor(r.denom()), scale.clone())
        };
        QuadScalar {
            a: snap_rat(&self.a),
            b: snap_rat(&self.b),
        }
    }

    /// Approximate f64 value. For display and graph layout only; never used
    /// in a decision.
    pub fn to_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::NAN) + self.b.to_f64().unwrap_or(f64::NAN) * SQRT2_F64
    }

    /// Canonical text encoding `a_num/a_den+b_num/b_den*sqrt2` (sign of the
    /// sqrt2 term folded into the separator). This is the wire format for
    /// JSON payloads and the hash preimage of the edge oracle, so it must be
    /// bit-exact: lowest terms, positive denominators, no leading zeros.
    pub fn encode(&self) -> String {
        let bsep = if self.b.is_negative() { '-' } else { '+' };
        let babs = self.b.abs();
        format!(
            "{}/{}{}{}/{}*sqrt2",
            self.a.numer(),
            self.a.denom(),
            bsep,
            babs.numer(),
            babs.denom()
        )
    }

    /// Inverse of [`QuadScalar::encode`].
    pub fn decode(s: &str) -> Result<Self, CircleError> {
        let body = s
            .strip_suffix("*sqrt2")
            .ok_or_else(|| CircleError::Parse(format!("missing *sqrt2 suffix in {s:?}")))?;
        // the separator is the first sign character after position 0
        let sep = body
            .char_indices()
            .skip(1)
            .find(|(_, c)| *c == '+' || *c == '-')
            .ok_or_else(|| CircleError::Parse(format!("missing separator in {s:?}")))?;
        let (a_str, rest) = body.split_at(sep.0);
        let (sign_ch, b_str) = rest.split_at(1);
        let a = parse_rational(a_str)?;
        let mut b = parse_rational(b_str)?;
        if sign_ch == "-" {
            b = -b;
        }
        Ok(QuadScalar::new(a, b))
    }
}

const SQRT2_F64: f64 = std::f64::consts::SQRT_2;

/// Relative error budget for the floating-point filter. Conversions and the
/// final sum together stay well under 2^-48 relative error; 2^-40 leaves a
/// wide safety margin.
const FLOAT_FILTER_REL: f64 = 1.0 / (1u64 << 40) as f64;
/// Absolute slack covering underflow-to-zero in the conversions.
const FLOAT_FILTER_ABS: f64 = 1e-280;

/// Sign of `a + b*sqrt2` from f64 estimates of the coefficients, or `None`
/// when the rigorous error interval straddles zero. A `Some` answer is
/// certain: the true value differs from the estimate by less than the bound.
fn float_sign(af: f64, bf: f64) -> Option<Ordering> {
    if !af.is_finite() || !bf.is_finite() {
        return None;
    }
    let t = af + bf * SQRT2_F64;
    let err = (af.abs() + bf.abs() * 1.5) * FLOAT_FILTER_REL + FLOAT_FILTER_ABS;
    if t > err {
        Some(Ordering::Greater)
    } else if t < -err {
        Some(Ordering::Less)
    } else {
        None
    }
}

fn rational_sign(r: &Rational) -> Ordering {
    match r.numer().sign() {
        Sign::Plus => Ordering::Greater,
        Sign::NoSign => Ordering::Equal,
        Sign::Minus => Ordering::Less,
    }
}

/// Exact floor of `b * sqrt(2)` for rational b.
fn floor_rat_sqrt2(b: &Rational) -> BigInt {
    if b.is_zero() {
        return BigInt::zero();
    }
    let p = b.numer().abs();
    let q = b.denom().clone();
    // floor(sqrt(2 p^2) / q) = isqrt(2 p^2) div q
    let f = (BigInt::from(2) * &p * &p).sqrt() / &q;
    if b.is_positive() {
        f
    } else {
        // b sqrt2 is irrational for b != 0, so floor(-x) = -floor(x) - 1
        -f - 1
    }
}

impl PartialOrd for QuadScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QuadScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        let af = self.a.to_f64().unwrap_or(f64::NAN);
        let bf = self.b.to_f64().unwrap_or(f64::NAN);
        let cf = other.a.to_f64().unwrap_or(f64::NAN);
        let df = other.b.to_f64().unwrap_or(f64::NAN);
        if af.is_finite() && bf.is_finite() && cf.is_finite() && df.is_finite() {
            let t = (af - cf) + (bf - df) * SQRT2_F64;
            let err = (af.abs() + cf.abs() + (bf.abs() + df.abs()) * 1.5) * FLOAT_FILTER_REL
                + FLOAT_FILTER_ABS;
            if t > err {
                return Ordering::Greater;
            }
            if t < -err {
                return Ordering::Less;
            }
        }
        (self.clone() - other.clone()).sign()
    }
}

impl Add for QuadScalar {
    type Output = QuadScalar;
    fn add(self, rhs: QuadScalar) -> QuadScalar {
        QuadScalar { a: self.a + rhs.a, b: self.b + rhs.b }
    }
}

impl Sub for QuadScalar {
    type Output = QuadScalar;
    fn sub(self, rhs: QuadScalar) -> QuadScalar {
        QuadScalar { a: self.a - rhs.a, b: self.b - rhs.b }
    }
}

impl Neg for QuadScalar {
    type Output = QuadScalar;
    fn neg(self) -> QuadScalar {
        QuadScalar { a: -self.a, b: -self.b }
    }
}

impl Mul for QuadScalar {
    type Output = QuadScalar;
    fn mul(self, rhs: QuadScalar) -> QuadScalar {
        let two = Rational::from(BigInt::from(2));
        QuadScalar {
            a: &self.a * &rhs.a + &self.b * &rhs.b * two,
            b: &self.a * &rhs.b + &self.b * &rhs.a,
        }
    }
}

impl<'a> Add for &'a QuadScalar {
    type Output = QuadScalar;
    fn add(self, rhs: &'a QuadScalar) -> QuadScalar {
        self.clone() + rhs.clone()
    }
}

impl<'a> Sub for &'a QuadScalar {
    type Output = QuadScalar;
    fn sub(self, rhs: &'a QuadScalar) -> QuadScalar {
        self.clone() - rhs.clone()
    }
}

impl fmt::Debug for QuadScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.encode())
    }
}

impl fmt::Display for QuadScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.encode())
    }
}

impl Serialize for QuadScalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.encode())
    }
}

impl<'de> Deserialize<'de> for QuadScalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        QuadScalar::decode(&s).map_err(serde::de::Error::custom)
    }
}

/// Parse either `l/m` (rational) or `a+b*sqrt2` forms, e.g. `7/2` or `2+1*sqrt2`.
pub fn parse_quad(s: &str) -> Result<QuadScalar, CircleError> {
    let t = s.trim();
    if t.ends_with("*sqrt2") {
        if t.contains('/') {
            QuadScalar::decode(t)
        } else {
            // integer coefficients shorthand: a+b*sqrt2
            let body = t.strip_suffix("*sqrt2").unwrap();
            let sep = body
                .char_indices()
                .skip(1)
                .find(|(_, c)| *c == '+' || *c == '-')
                .ok_or_else(|| CircleError::Parse(format!("missing separator in {s:?}")))?;
            let (a_str, rest) = body.split_at(sep.0);
            let (sign_ch, b_str) = rest.split_at(1);
            let a = parse_rational(a_str)?;
            let mut b = parse_rational(b_str)?;
            if sign_ch == "-" {
                b = -b;
            }
            Ok(QuadScalar::new(a, b))
        }
    } else {
        Ok(QuadScalar::from_rational(parse_rational(t)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qs(an: i64, ad: i64, bn: i64, bd: i64) -> QuadScalar {
        QuadScalar::new(rat(an, ad), rat(bn, bd))
    }

    #[test]
    fn add_componentwise() {
        let one = qs(1, 1, 0, 1);
        let root = qs(0, 1, 1, 1);
        assert_eq!(one.clone() + root.clone(), qs(1, 1, 1, 1));
        assert_eq!(one.clone() + QuadScalar::zero(), one);
        // (1/2 + sqrt2) + (1/2 - sqrt2) = 1
        assert_eq!(qs(1, 2, 1, 1) + qs(1, 2, -1, 1), QuadScalar::one());
    }

    #[test]
    fn cmp_symbolic() {
        assert_eq!(qs(1, 1, 0, 1).cmp(&qs(0, 1, 1, 1)), Ordering::Less);
        let x = qs(3, 7, -2, 9);
        assert_eq!(x.cmp(&x), Ordering::Equal);
        // 3 vs 2 sqrt2: 9 > 8
        assert_eq!(qs(3, 1, 0, 1).cmp(&qs(0, 1, 2, 1)), Ordering::Greater);
    }

    #[test]
    fn floor_values() {
        assert_eq!(QuadScalar::from_rational(rat(7, 2)).floor(), BigInt::from(3));
        assert_eq!(QuadScalar::sqrt2().floor(), BigInt::from(1));
        // -1/2 + sqrt2 = 0.914...
        assert_eq!(qs(-1, 2, 1, 1).floor(), BigInt::from(0));
        assert_eq!(qs(-1, 2, -1, 1).floor(), BigInt::from(-2));
        assert_eq!(QuadScalar::from_int(-3).floor(), BigInt::from(-3));
    }

    #[test]
    fn mul_rat_examples() {
        let x = qs(1, 1, 1, 1);
        assert_eq!(x.mul_rat(&rat(2, 1)), qs(2, 1, 2, 1));
        assert_eq!(x.mul_rat(&Rational::one()), x);
        assert_eq!(qs(3, 1, 1, 1).mul_rat(&rat(1, 3)), qs(1, 1, 1, 3));
    }

    #[test]
    fn recip_roundtrip() {
        let x = qs(2, 1, 1, 1);
        let inv = x.recip().unwrap();
        assert_eq!(x * inv, QuadScalar::one());
        assert!(QuadScalar::zero().recip().is_err());
    }

    #[test]
    fn encoding_roundtrip_and_canonical_form() {
        let x = qs(-3, 4, 5, 6);
        assert_eq!(x.encode(), "-3/4+5/6*sqrt2");
        assert_eq!(QuadScalar::decode(&x.encode()).unwrap(), x);
        let y = qs(1, 2, -7, 3);
        assert_eq!(y.encode(), "1/2-7/3*sqrt2");
        assert_eq!(QuadScalar::decode(&y.encode()).unwrap(), y);
        assert_eq!(QuadScalar::zero().encode(), "0/1+0/1*sqrt2");
        // reduction to lowest terms happens at construction
        assert_eq!(qs(2, 4, 0, 1).encode(), "1/2+0/1*sqrt2");
    }

    #[test]
    fn parse_quad_forms() {
        assert_eq!(parse_quad("7/2").unwrap(), qs(7, 2, 0, 1));
        assert_eq!(parse_quad("2+1*sqrt2").unwrap(), qs(2, 1, 1, 1));
        assert_eq!(parse_quad("0/1+1/2*sqrt2").unwrap(), qs(0, 1, 1, 2));
        assert!(parse_quad("nonsense").is_err());
    }
}

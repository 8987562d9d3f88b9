//! Exact arithmetic used by every certified inequality.
//!
//! Gromov products are half-integers on unit-edge graphs, so they are stored
//! doubled. Quasi-isometry constants are fitted on the half-integer grid so a
//! fitted value can be re-verified with integer arithmetic only.

use std::fmt;
use std::ops::{Add, Sub};

use num_bigint::{BigInt, BigUint};
use num_integer::Roots;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = Ratio<i64>;

/// A number in `½ℤ`, stored as twice its value.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i64);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_doubled(doubled: i64) -> Self {
        HalfInt(doubled)
    }

    pub const fn from_int(v: i64) -> Self {
        HalfInt(2 * v)
    }

    pub const fn doubled(self) -> i64 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn ceil(self) -> i64 {
        self.0.div_euclid(2) + self.0.rem_euclid(2)
    }

    pub fn floor(self) -> i64 {
        self.0.div_euclid(2)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn to_rational(self) -> Rational {
        Rational::new(self.0, 2)
    }

    pub fn clamp_nonneg(self) -> Self {
        HalfInt(self.0.max(0))
    }

    /// Smallest half-integer `>= r`.
    pub fn ceil_of(r: Rational) -> Self {
        let doubled = r * 2;
        HalfInt(doubled.ceil().to_integer())
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        if a.is_multiple_of(2) {
            write!(f, "{sign}{}", a / 2)
        } else {
            write!(f, "{sign}{}.5", a / 2)
        }
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_integer() {
            s.serialize_i64(self.0 / 2)
        } else {
            s.serialize_f64(self.to_f64())
        }
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        let doubled = v * 2.0;
        if doubled.fract() != 0.0 {
            return Err(serde::de::Error::custom(format!(
                "{v} is not a half-integer"
            )));
        }
        Ok(HalfInt(doubled as i64))
    }
}

/// Whether `k` satisfies `L/k - k <= d <= k*L + k` for a single pair with
/// domain distance `l` and image distance `d`.
pub fn qi_pair_holds(k: HalfInt, l: u64, d: u64) -> bool {
    let h = k.doubled();
    if h <= 0 {
        return false;
    }
    let h = h as u128;
    let (l, d) = (l as u128, d as u128);
    // L/k - k <= d  <=>  4L <= 2hd + h^2 ;  d <= kL + k  <=>  2d <= h(L+1)
    4 * l <= 2 * h * d + h * h && 2 * d <= h * (l + 1)
}

/// Smallest `k` on the half-integer grid, `k >= 1`, with
/// `L/k - k <= d <= k*L + k` for this pair.
pub fn qi_pair_min(l: u64, d: u64) -> HalfInt {
    let (l, d) = (l as u128, d as u128);
    // lower side: h^2 + 2hd - 4L >= 0  <=>  h >= sqrt(d^2 + 4L) - d
    let disc = d * d + 4 * l;
    let s = disc.sqrt();
    let mut h_low = if s * s == disc { s - d } else { s + 1 - d };
    while h_low > 0 && (h_low - 1) * (h_low - 1) + 2 * (h_low - 1) * d >= 4 * l {
        h_low -= 1;
    }
    while h_low * h_low + 2 * h_low * d < 4 * l {
        h_low += 1;
    }
    // upper side: h >= 2d / (L + 1)
    let h_up = (2 * d).div_ceil(l + 1);
    let h = h_low.max(h_up).max(2);
    HalfInt::from_doubled(h as i64)
}

/// Fit the smallest half-integer `k >= 1` over all `(domain, image)` pairs.
pub fn fit_qi_constant<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> HalfInt {
    pairs
        .into_iter()
        .map(|(l, d)| qi_pair_min(l, d))
        .max()
        .unwrap_or(HalfInt::ONE)
}

pub fn big(r: Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

pub fn big_int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn pow_big(base: &BigRational, exp: i64) -> BigRational {
    if exp >= 0 {
        num_traits::pow(base.clone(), exp as usize)
    } else {
        num_traits::pow(base.recip(), (-exp) as usize)
    }
}

pub fn big_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // scale down huge numerators/denominators before dividing
            let nb = r.numer().bits() as i64;
            let db = r.denom().bits() as i64;
            let shift = (nb.max(db) - 1000).max(0) as usize;
            let n = (r.numer() >> shift).to_f64().unwrap_or(f64::INFINITY);
            let d = (r.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
            n / d
        }
    }
}

/// The positive real number `radicand^(1/index)`, kept symbolic so that
/// inequalities involving it can be decided exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KthRoot {
    pub radicand: BigRational,
    pub index: u32,
}

impl KthRoot {
    pub fn new(radicand: BigRational, index: u32) -> Self {
        assert!(index >= 1, "root index must be positive");
        assert!(radicand.is_positive(), "radicand must be positive");
        KthRoot { radicand, index }
    }

    pub fn to_f64(&self) -> f64 {
        big_to_f64(&self.radicand).powf(1.0 / self.index as f64)
    }

    /// Exact test of `lhs >= coeff * self^n` for positive `lhs` and `coeff`.
    pub fn scaled_power_le(&self, coeff: &BigRational, n: u32, lhs: &BigRational) -> bool {
        // lhs >= coeff * r^(n/k)  <=>  (lhs/coeff)^k >= r^n
        let ratio = lhs / coeff;
        let left = pow_big(&ratio, self.index as i64);
        let right = pow_big(&self.radicand, n as i64);
        left >= right
    }

    pub fn exceeds_one(&self) -> bool {
        self.radicand > BigRational::one()
    }
}

impl fmt::Display for KthRoot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 1 {
            write!(f, "{}", self.radicand)
        } else {
            write!(f, "({})^(1/{})", self.radicand, self.index)
        }
    }
}

/// `2^(1/(delta+1))` raised to the `exponent`, compared against an integer
/// length: decides `length >= 2^(exponent/(delta+1))` exactly.
pub fn length_exceeds_divergence_bound(length: u64, delta: HalfInt, exponent: u64) -> bool {
    // delta = h/2, so exponent/(delta+1) = 2*exponent/(h+2);
    // length^(h+2) >= 2^(2*exponent)
    let h = delta.doubled().max(0) as u32;
    let lhs = BigUint::from(length).pow(h + 2);
    let rhs = BigUint::one() << (2 * exponent as usize);
    if length == 0 {
        return rhs.is_zero();
    }
    lhs >= rhs
}

/// Floating-point value of `2^(1/(delta+1))`, for reporting only.
pub fn divergence_base(delta: HalfInt) -> f64 {
    2f64.powf(1.0 / (delta.to_f64() + 1.0))
}

pub fn ratio_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Serde adapter storing a [`BigRational`] as its `"p/q"` string so JSON
/// reports stay exact.
pub mod big_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Parse `"3"`, `"-3/4"` or `"0.25"` as an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        return (d != 0).then(|| Rational::new(n, d));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        if frac.is_empty() || frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let scale = 10i64.pow(frac.len() as u32);
        let neg = whole.starts_with('-');
        let w: i64 = if whole.is_empty() || whole == "-" {
            0
        } else {
            whole.parse().ok()?
        };
        let f: i64 = frac.parse().ok()?;
        let mag = w.abs() * scale + f;
        return Some(Rational::new(if neg { -mag } else { mag }, scale));
    }
    t.parse().ok().map(Rational::from_integer)
}

/// Serde adapter writing a [`Rational`] as `"p/q"` (or `"p"` when
/// integral) and reading an integer, a decimal or fraction string, or a
/// `[p, q]` pair.
pub mod rational_flex {
    use super::{parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
        Pair(i64, i64),
    }

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(Rational::from_integer(v)),
            Repr::Text(t) => parse_rational(&t)
                .ok_or_else(|| serde::de::Error::custom(format!("bad rational {t:?}"))),
            Repr::Pair(n, q) if q != 0 => Ok(Rational::new(n, q)),
            Repr::Pair(..) => Err(serde::de::Error::custom("zero denominator")),
        }
    }
}

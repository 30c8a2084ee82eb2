//! Software wide floats for the analytic side of the crate.
//!
//! Eigenvalues of the equispaced circle Gram and the partial theta sums
//! become superexponentially small as the bandwidth grows, far below what
//! double precision can resolve after cancellation. [`Wide`] wraps an
//! `astro-float` number with a fixed working precision; [`Precision`]
//! converts a requested number of decimal digits into binary precision
//! with guard bits.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;
const GUARD_BITS: usize = 64;
const LOG2_10: f64 = std::f64::consts::LOG2_10;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constants cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// Requested accuracy in significant decimal digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Precision(u32);

impl Precision {
    pub const MIN: u32 = 17;
    pub const MAX: u32 = 200;
    pub const DEFAULT: Precision = Precision(30);
    /// Plain IEEE double; used by certificates evaluated without wide floats.
    pub const DOUBLE: Precision = Precision(17);

    pub fn new(digits: u32) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&digits) {
            Ok(Precision(digits))
        } else {
            Err(Error::Precision(digits))
        }
    }

    pub fn digits(self) -> u32 {
        self.0
    }

    /// Working precision in bits, including guard bits.
    pub fn bits(self) -> usize {
        (self.0 as f64 * LOG2_10).ceil() as usize + GUARD_BITS
    }

    /// `10^(-digits + shift)` as a wide number, for thresholds such as
    /// "below 10^(−precision+5)".
    pub fn epsilon_shifted(self, shift: i32) -> Wide {
        Wide::pow10(-(self.0 as i32) + shift, self.bits())
    }

    pub fn is_double(self) -> bool {
        self.0 <= Self::MIN
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self::DEFAULT
    }
}

fn digits_for_bits(bits: usize) -> u32 {
    ((bits.saturating_sub(GUARD_BITS)) as f64 / LOG2_10).floor().max(1.0) as u32
}

/// Wide float with its own working precision in bits.
#[derive(Clone)]
pub struct Wide {
    v: BigFloat,
    bits: usize,
}

impl Wide {
    pub fn from_f64(x: f64, bits: usize) -> Self {
        Wide { v: BigFloat::from_f64(x, bits), bits }
    }

    pub fn from_i64(x: i64, bits: usize) -> Self {
        Wide { v: BigFloat::from_i64(x, bits), bits }
    }

    pub fn zero(bits: usize) -> Self {
        Self::from_i64(0, bits)
    }

    pub fn one(bits: usize) -> Self {
        Self::from_i64(1, bits)
    }

    pub fn pi(bits: usize) -> Self {
        Wide { v: with_consts(|cc| cc.pi(bits, RM)), bits }
    }

    pub fn two_pi(bits: usize) -> Self {
        Self::pi(bits).mul_i64(2)
    }

    /// `10^e`, exact for nonnegative `e` and correctly rounded otherwise.
    pub fn pow10(e: i32, bits: usize) -> Self {
        let ten = BigFloat::from_i64(10, bits);
        let p = ten.powi(e.unsigned_abs() as usize, bits, RM);
        let v = if e >= 0 { p } else { p.reciprocal(bits, RM) };
        Wide { v, bits }
    }

    /// Parses a decimal literal such as `-1.25e-7`.
    pub fn parse(s: &str, bits: usize) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b)) {
            return Err(Error::Parse(format!("not a decimal number: {s:?}")));
        }
        let v = with_consts(|cc| BigFloat::parse(t, Radix::Dec, bits, RM, cc));
        if v.is_nan() {
            return Err(Error::Parse(format!("not a decimal number: {s:?}")));
        }
        Ok(Wide { v, bits })
    }

    /// Parses a decimal literal at a precision matching its digit count.
    pub fn parse_auto(s: &str) -> Result<Self> {
        let mantissa = s.split(['e', 'E']).next().unwrap_or("");
        let digits = mantissa.bytes().filter(u8::is_ascii_digit).count().max(17) as u32;
        Self::parse(s, Precision(digits.min(Precision::MAX)).bits())
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Same value, rounded to another working precision.
    pub fn with_bits(&self, bits: usize) -> Self {
        let mut v = self.v.clone();
        // Only fails on NaN/Inf, which carry no mantissa to round.
        let _ = v.set_precision(bits, RM);
        Wide { v, bits }
    }

    fn wrap(&self, v: BigFloat) -> Self {
        Wide { v, bits: self.bits }
    }

    pub fn exp(&self) -> Self {
        self.wrap(with_consts(|cc| self.v.exp(self.bits, RM, cc)))
    }

    pub fn ln(&self) -> Self {
        self.wrap(with_consts(|cc| self.v.ln(self.bits, RM, cc)))
    }

    pub fn cos(&self) -> Self {
        self.wrap(with_consts(|cc| self.v.cos(self.bits, RM, cc)))
    }

    pub fn sin(&self) -> Self {
        self.wrap(with_consts(|cc| self.v.sin(self.bits, RM, cc)))
    }

    pub fn sqrt(&self) -> Self {
        self.wrap(self.v.sqrt(self.bits, RM))
    }

    pub fn abs(&self) -> Self {
        self.wrap(self.v.abs())
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        self * &Wide::from_i64(k, self.bits)
    }

    pub fn div_i64(&self, k: i64) -> Self {
        self / &Wide::from_i64(k, self.bits)
    }

    pub fn square(&self) -> Self {
        self * self
    }

    pub fn is_negative(&self) -> bool {
        self.v.is_negative() && !self.v.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn max(&self, other: &Wide) -> Wide {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn min(&self, other: &Wide) -> Wide {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    fn raw_decimal(&self) -> String {
        with_consts(|cc| self.v.format(Radix::Dec, RM, cc)).unwrap_or_else(|_| "NaN".into())
    }

    /// Nearest double.
    pub fn to_f64(&self) -> f64 {
        if self.v.is_zero() {
            return 0.0;
        }
        self.to_decimal(20).parse().unwrap_or(f64::NAN)
    }

    /// Scientific notation rounded to `digits` significant digits,
    /// trailing zeros trimmed, e.g. `-1.8997962224145e-1`.
    pub fn to_decimal(&self, digits: u32) -> String {
        if self.v.is_zero() {
            return "0".into();
        }
        round_scientific(&self.raw_decimal(), digits.max(1) as usize)
    }

    /// Decimal rendering at the number's own precision.
    pub fn to_decimal_native(&self) -> String {
        self.to_decimal(digits_for_bits(self.bits))
    }
}

/// Rounds astro-float's `[-]d.ddd e[+-]x` output half-up on the decimal
/// digit string (the input already carries guard digits).
fn round_scientific(raw: &str, digits: usize) -> String {
    let (neg, body) = match raw.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, raw),
    };
    let (mant, exp) = match body.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i64>().unwrap_or(0)),
        None => (body, 0),
    };
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    let mut ds: Vec<u8> = int_part.bytes().chain(frac_part.bytes()).map(|b| b - b'0').collect();
    // Normalise to a single leading nonzero digit.
    let mut exp = exp + int_part.len() as i64 - 1;
    while ds.len() > 1 && ds[0] == 0 {
        ds.remove(0);
        exp -= 1;
    }
    if ds.len() > digits {
        let round_up = ds[digits] >= 5;
        ds.truncate(digits);
        if round_up {
            let mut i = digits;
            loop {
                if i == 0 {
                    ds.insert(0, 1);
                    ds.truncate(digits);
                    exp += 1;
                    break;
                }
                i -= 1;
                if ds[i] == 9 {
                    ds[i] = 0;
                } else {
                    ds[i] += 1;
                    break;
                }
            }
        }
    }
    while ds.len() > 1 && *ds.last().unwrap() == 0 {
        ds.pop();
    }
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push((b'0' + ds[0]) as char);
    if ds.len() > 1 {
        out.push('.');
        out.extend(ds[1..].iter().map(|d| (b'0' + d) as char));
    }
    out.push('e');
    out.push_str(&exp.to_string());
    out
}

impl fmt::Debug for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Wide({}, {} bits)", self.to_decimal_native(), self.bits)
    }
}

impl fmt::Display for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_native())
    }
}

impl PartialEq for Wide {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Wide {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.v.cmp(&other.v).map(|c| c.cmp(&0))
    }
}

macro_rules! wide_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<&Wide> for &Wide {
            type Output = Wide;
            fn $method(self, rhs: &Wide) -> Wide {
                let bits = self.bits.max(rhs.bits);
                Wide { v: self.v.$method(&rhs.v, bits, RM), bits }
            }
        }
        impl $tr<Wide> for Wide {
            type Output = Wide;
            fn $method(self, rhs: Wide) -> Wide {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Wide> for Wide {
            type Output = Wide;
            fn $method(self, rhs: &Wide) -> Wide {
                (&self).$method(rhs)
            }
        }
    };
}

wide_binop!(Add, add);
wide_binop!(Sub, sub);
wide_binop!(Mul, mul);
wide_binop!(Div, div);

impl Neg for Wide {
    type Output = Wide;
    fn neg(self) -> Wide {
        Wide { v: self.v.neg(), bits: self.bits }
    }
}

impl Neg for &Wide {
    type Output = Wide;
    fn neg(self) -> Wide {
        Wide { v: self.v.clone().neg(), bits: self.bits }
    }
}

/// Neumaier-compensated accumulator for doubles.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::new();
        iter.into_iter().for_each(|x| acc.add(x));
        acc
    }
}

/// Neumaier-compensated accumulator for wide floats.
#[derive(Debug, Clone)]
pub struct WideSum {
    sum: Wide,
    comp: Wide,
}

impl WideSum {
    pub fn new(bits: usize) -> Self {
        WideSum { sum: Wide::zero(bits), comp: Wide::zero(bits) }
    }

    pub fn add(&mut self, x: &Wide) {
        let t = &self.sum + x;
        let c = if self.sum.abs() >= x.abs() {
            (&self.sum - &t) + x
        } else {
            (x - &t) + &self.sum
        };
        self.comp = &self.comp + &c;
        self.sum = t;
    }

    pub fn total(&self) -> Wide {
        &self.sum + &self.comp
    }
}

/// A scalar that is either a plain double or a wide float.
///
/// Serialises as a JSON number or as a decimal string respectively, so
/// certificates survive text round trips exactly.
#[derive(Debug, Clone)]
pub enum Real {
    F64(f64),
    Wide(Wide),
}

impl Real {
    pub fn to_f64(&self) -> f64 {
        match self {
            Real::F64(x) => *x,
            Real::Wide(w) => w.to_f64(),
        }
    }

    pub fn to_wide(&self, bits: usize) -> Wide {
        match self {
            Real::F64(x) => Wide::from_f64(*x, bits),
            Real::Wide(w) => w.with_bits(bits),
        }
    }

    fn bits(&self) -> usize {
        match self {
            Real::F64(_) => 64,
            Real::Wide(w) => w.bits(),
        }
    }

    /// Stores `w` as a double when `precision` does not exceed double
    /// precision, else as a decimal string of `precision` digits.
    pub fn at_precision(w: &Wide, precision: Precision) -> Real {
        if precision.is_double() {
            Real::F64(w.to_f64())
        } else {
            let s = w.to_decimal(precision.digits());
            Real::Wide(Wide::parse(&s, precision.bits()).expect("own decimal output parses"))
        }
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Real::F64(a), Real::F64(b)) => a == b,
            _ => {
                let bits = self.bits().max(other.bits());
                self.to_wide(bits) == other.to_wide(bits)
            }
        }
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        Real::F64(x)
    }
}

impl Serialize for Wide {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_decimal_native())
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Real::F64(x) => s.serialize_f64(*x),
            Real::Wide(w) => s.serialize_str(&w.to_decimal_native()),
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(x) => Ok(Real::F64(x)),
            Raw::S(s) => Wide::parse_auto(&s).map(Real::Wide).map_err(serde::de::Error::custom),
        }
    }
}

/// Reads a JSON number or decimal string into a double.
pub(crate) fn de_f64_lenient<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Real::deserialize(d).map(|r| r.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_bounds() {
        assert!(Precision::new(16).is_err());
        assert!(Precision::new(17).is_ok());
        assert!(Precision::new(200).is_ok());
        assert!(Precision::new(201).is_err());
        for d in 17..=200 {
            assert_eq!(digits_for_bits(Precision(d).bits()), d);
        }
    }

    #[test]
    fn pi_and_exp_match_known_digits() {
        let bits = Precision::new(50).unwrap().bits();
        assert_eq!(
            Wide::pi(bits).to_decimal(40),
            "3.141592653589793238462643383279502884197e0"
        );
        let e20 = Wide::from_i64(-20, bits).exp();
        assert_eq!(e20.to_decimal(25), "2.06115362243855782796594e-9");
    }

    #[test]
    fn rounding_carries() {
        assert_eq!(round_scientific("9.9996e2", 4), "1e3");
        assert_eq!(round_scientific("-1.23449e-3", 4), "-1.234e-3");
        assert_eq!(round_scientific("12.5e0", 2), "1.3e1");
        assert_eq!(round_scientific("0.0125e0", 2), "1.3e-2");
    }

    #[test]
    fn to_f64_round_trips_doubles() {
        for x in [0.1, -3.5e-300, 1.0 / 3.0, 6.02214076e23, -0.189_979_622_241_450_6] {
            assert_eq!(Wide::from_f64(x, 200).to_f64(), x);
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Wide::parse("abc", 128).is_err());
        assert!(Wide::parse("", 128).is_err());
        assert!(Wide::parse("1.5e-3", 128).is_ok());
    }

    #[test]
    fn compensated_sums_recover_cancellation() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(xs.iter().copied().collect::<Neumaier>().total(), 2.0);
        let mut w = WideSum::new(128);
        for x in xs {
            w.add(&Wide::from_f64(x, 128));
        }
        assert_eq!(w.total().to_f64(), 2.0);
    }

    #[test]
    fn real_serde_forms() {
        let r: Real = serde_json::from_str("0.25").unwrap();
        assert!(matches!(r, Real::F64(x) if x == 0.25));
        let r: Real = serde_json::from_str("\"-1.234567890123456789012345e-5\"").unwrap();
        let Real::Wide(w) = &r else { panic!("expected wide") };
        assert_eq!(w.to_decimal(25), "-1.234567890123456789012345e-5");
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"-1.234567890123456789012345e-5\"");
    }
}

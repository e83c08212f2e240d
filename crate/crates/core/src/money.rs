//! Fixed-point currency amounts.
//!
//! All budgets, prices and valuations are stored as an integer count of
//! minor units (1/10_000 of a currency unit). Integer arithmetic keeps the
//! ledger replay and cross-platform runs bit-exact.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Minor units per currency unit.
pub const SCALE: i64 = 10_000;

/// Largest magnitude (in currency units) accepted when converting from a
/// float. Keeps `units -> minor -> units` round trips exact.
pub const MAX_UNITS: f64 = 1.0e11;

/// A currency amount in minor units.
///
/// The type itself is signed so that profits and intermediate differences
/// can be represented; budgets and prices are validated as non-negative
/// where they enter the market.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_minor(minor: i64) -> Self {
        Money(minor)
    }

    pub const fn from_units(units: i64) -> Self {
        Money(units * SCALE)
    }

    /// Converts a float amount of currency units, rounding to the nearest
    /// minor unit. Returns `None` for non-finite or out-of-range input.
    pub fn from_f64(units: f64) -> Option<Self> {
        if !units.is_finite() || units.abs() > MAX_UNITS {
            return None;
        }
        Some(Money((units * SCALE as f64).round() as i64))
    }

    pub const fn minor(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_sub(self, rhs: Money) -> Option<Money> {
        self.0.checked_sub(rhs.0).map(Money)
    }

    /// Multiplies by a real factor and rounds to the nearest minor unit.
    pub fn scale(self, factor: f64) -> Money {
        Money((self.0 as f64 * factor).round() as i64)
    }

    /// Arithmetic mean of `amounts` rounded to the nearest minor unit
    /// (halves away from zero). `None` when empty.
    pub fn mean(amounts: &[Money]) -> Option<Money> {
        if amounts.is_empty() {
            return None;
        }
        let sum: i128 = amounts.iter().map(|m| m.0 as i128).sum();
        Some(Money(div_round(sum, amounts.len() as i128) as i64))
    }
}

/// Integer division rounding halves away from zero.
pub(crate) fn div_round(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = num / den;
    let r = num % den;
    if 2 * r.abs() >= den {
        q + num.signum()
    } else {
        q
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let scale = SCALE as u64;
        write!(f, "{sign}{}.{:04}", abs / scale, abs % scale)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Mul<u64> for Money {
    type Output = Money;
    fn mul(self, rhs: u64) -> Money {
        Money(self.0 * rhs as i64)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.copied().sum()
    }
}

// Serialized as a plain decimal number of currency units so config files
// stay human-editable.
impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let units = f64::deserialize(d)?;
        Money::from_f64(units)
            .ok_or_else(|| serde::de::Error::custom(format!("amount {units} is out of range")))
    }
}

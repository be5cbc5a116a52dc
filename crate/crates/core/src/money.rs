//! Exact currency amounts.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A signed amount of US currency held as whole cents.
///
/// All prize sums and simulated net gains are accumulated in this type so
/// that totals are exact and independent of summation order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cents(pub i64);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid currency amount {0:?}")]
pub struct ParseCentsError(pub String);

impl Cents {
    pub const ZERO: Cents = Cents(0);

    /// Nearest cent to a dollar amount, halves rounded away from zero.
    pub fn from_dollars(dollars: f64) -> Self {
        Cents((dollars * 100.0).round() as i64)
    }

    pub fn from_whole_dollars(dollars: i64) -> Self {
        Cents(dollars * 100)
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Parses amounts such as `1234`, `1234.5`, `$1,234.56` or `-12.00`.
    ///
    /// More than two fractional digits is rejected rather than rounded.
    pub fn parse(raw: &str) -> Result<Self, ParseCentsError> {
        let err = || ParseCentsError(raw.to_string());
        let mut s: String = raw.trim().chars().filter(|c| *c != ',').collect();
        let negative = s.starts_with('-');
        if negative {
            s.remove(0);
        }
        let s = s.strip_prefix('$').unwrap_or(&s);
        if s.is_empty() {
            return Err(err());
        }
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(err());
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 2 {
            return Err(err());
        }
        let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| err())? };
        let frac: i64 = match frac.len() {
            0 => 0,
            1 => frac.parse::<i64>().map_err(|_| err())? * 10,
            _ => frac.parse().map_err(|_| err())?,
        };
        let cents = whole.checked_mul(100).and_then(|w| w.checked_add(frac)).ok_or_else(err)?;
        Ok(Cents(if negative { -cents } else { cents }))
    }

    /// Rounds to the nearest multiple of `unit`, halves away from zero.
    pub fn round_to(self, unit: Cents) -> Cents {
        let u = unit.0;
        debug_assert!(u > 0);
        let q = self.0.abs();
        let r = ((q + u / 2) / u) * u;
        Cents(if self.0 < 0 { -r } else { r })
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl AddAssign for Cents {
    fn add_assign(&mut self, rhs: Cents) {
        self.0 += rhs.0;
    }
}

impl Sub for Cents {
    type Output = Cents;
    fn sub(self, rhs: Cents) -> Cents {
        Cents(self.0 - rhs.0)
    }
}

impl Neg for Cents {
    type Output = Cents;
    fn neg(self) -> Cents {
        Cents(-self.0)
    }
}

impl Mul<i64> for Cents {
    type Output = Cents;
    fn mul(self, rhs: i64) -> Cents {
        Cents(self.0 * rhs)
    }
}

impl Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

impl<'a> Sum<&'a Cents> for Cents {
    fn sum<I: Iterator<Item = &'a Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

/// Serializes [`Cents`] as a decimal dollar amount, for human-edited files.
pub mod serde_dollars {
    use super::Cents;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &Cents, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(c.dollars())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Cents, D::Error> {
        let v = f64::deserialize(d)?;
        if !v.is_finite() {
            return Err(serde::de::Error::custom("non-finite dollar amount"));
        }
        let c = Cents::from_dollars(v);
        if (c.dollars() - v).abs() > 1e-6 * v.abs().max(1.0) {
            return Err(serde::de::Error::custom(format!("{v} is not a whole number of cents")));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(Cents::parse("600").unwrap(), Cents(60000));
        assert_eq!(Cents::parse("$1,234.56").unwrap(), Cents(123456));
        assert_eq!(Cents::parse(" 12.5 ").unwrap(), Cents(1250));
        assert_eq!(Cents::parse("-3.07").unwrap(), Cents(-307));
        assert_eq!(Cents::parse(".25").unwrap(), Cents(25));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "$", "abc", "1.234", "1.2.3", "12a", "."] {
            assert!(Cents::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn display_and_rounding() {
        assert_eq!(Cents(-36000).to_string(), "-360.00");
        assert_eq!(Cents(5).to_string(), "0.05");
        let k = Cents::from_whole_dollars(1000);
        assert_eq!(Cents(-71_549_900).round_to(k), Cents(-71_500_000));
        assert_eq!(Cents(50_000).round_to(k), Cents(100_000));
        assert_eq!(Cents(-50_000).round_to(k), Cents(-100_000));
        assert_eq!(Cents(49_999).round_to(k), Cents(0));
    }
}

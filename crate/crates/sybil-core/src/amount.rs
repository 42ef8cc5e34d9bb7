//! Exact token amounts.
//!
//! Amounts arrive as decimal strings and are carried as a non-negative
//! fixed-point integer with 18 fractional digits, so amount-tolerance
//! matching never suffers float drift and snapshot round-trips are
//! byte-stable.

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Number of fractional decimal digits carried.
pub const AMOUNT_SCALE: u32 = 18;
const SCALE_FACTOR: u128 = 10u128.pow(AMOUNT_SCALE);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AmountError {
    #[error("negative amount")]
    Negative,
    #[error("empty amount string")]
    Empty,
    #[error("invalid digit {0:?} in amount")]
    BadDigit(char),
    #[error("more than {AMOUNT_SCALE} fractional digits")]
    TooPrecise,
    #[error("amount overflows the fixed-point range")]
    Overflow,
}

/// Non-negative decimal amount, fixed point with 18 fractional digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount(u128);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    /// Raw fixed-point units (amount × 10¹⁸).
    pub fn raw(self) -> u128 {
        self.0
    }

    pub fn from_raw(units: u128) -> Self {
        Amount(units)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn saturating_add(self, other: Amount) -> Amount {
        Amount(self.0.saturating_add(other.0))
    }

    /// Lossy conversion for tolerance arithmetic. u128 → f64 keeps ~15.9
    /// significant digits, far more than any relative-gap threshold needs.
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE_FACTOR as f64
    }

    /// Relative gap |a−b| / max(a, b, eps); `eps` guards the zero case.
    pub fn relative_gap(a: Amount, b: Amount, eps: f64) -> f64 {
        let (x, y) = (a.to_f64(), b.to_f64());
        (x - y).abs() / x.max(y).max(eps)
    }
}

impl FromStr for Amount {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(AmountError::Empty);
        }
        if let Some(rest) = s.strip_prefix('-') {
            // "-0" and friends are still rejected: the schema has no
            // negative amounts at all.
            let _ = rest;
            return Err(AmountError::Negative);
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if frac_part.len() as u32 > AMOUNT_SCALE {
            return Err(AmountError::TooPrecise);
        }
        let mut units: u128 = 0;
        for c in int_part.chars() {
            let d = c.to_digit(10).ok_or(AmountError::BadDigit(c))? as u128;
            units = units
                .checked_mul(10)
                .and_then(|u| u.checked_add(d))
                .ok_or(AmountError::Overflow)?;
        }
        units = units.checked_mul(SCALE_FACTOR).ok_or(AmountError::Overflow)?;
        let mut frac: u128 = 0;
        for c in frac_part.chars() {
            let d = c.to_digit(10).ok_or(AmountError::BadDigit(c))? as u128;
            frac = frac * 10 + d;
        }
        frac *= 10u128.pow(AMOUNT_SCALE - frac_part.len() as u32);
        units.checked_add(frac).map(Amount).ok_or(AmountError::Overflow)
    }
}

impl fmt::Display for Amount {
    /// Canonical form: no trailing fractional zeros, no trailing dot.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let int = self.0 / SCALE_FACTOR;
        let frac = self.0 % SCALE_FACTOR;
        if frac == 0 {
            return write!(f, "{int}");
        }
        let digits = format!("{frac:018}");
        write!(f, "{int}.{}", digits.trim_end_matches('0'))
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

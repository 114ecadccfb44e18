//! Exact fractions for user-facing thresholds.
//!
//! Thresholds such as `0.40` are parsed from their decimal text into an exact
//! ratio so that `0.40 × 10` is exactly 4 on every platform.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FractionError {
    #[error("invalid fraction {0:?}: expected a decimal like 0.4 or a ratio like 2/5")]
    Syntax(String),
    #[error("fraction {0} is outside (0, 1]")]
    OutOfRange(String),
}

/// A rational number in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(Ratio<u64>);

impl Fraction {
    pub fn new(numer: u64, denom: u64) -> Result<Self, FractionError> {
        if denom == 0 {
            return Err(FractionError::Syntax(format!("{numer}/{denom}")));
        }
        let r = Ratio::new(numer, denom);
        if *r.numer() == 0 || r.numer() > r.denom() {
            return Err(FractionError::OutOfRange(format!("{numer}/{denom}")));
        }
        Ok(Fraction(r))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    /// `round(self × n)` with halves rounded up, in integer arithmetic.
    pub fn round_half_up_of(&self, n: u64) -> u64 {
        let num = u128::from(self.numer()) * u128::from(n);
        let den = u128::from(self.denom());
        ((2 * num + den) / (2 * den)) as u64
    }

    /// True when `part / whole >= self`.
    pub fn is_met_by(&self, part: u64, whole: u64) -> bool {
        u128::from(part) * u128::from(self.denom()) >= u128::from(self.numer()) * u128::from(whole)
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl FromStr for Fraction {
    type Err = FractionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let syntax = || FractionError::Syntax(s.to_string());
        if let Some((n, d)) = t.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| syntax())?;
            let d: u64 = d.trim().parse().map_err(|_| syntax())?;
            return Fraction::new(n, d);
        }
        let (int_part, frac_part) = t.split_once('.').unwrap_or((t, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(syntax());
        }
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) || frac_part.len() > 18 {
            return Err(syntax());
        }
        let denom = 10u64.pow(frac_part.len() as u32);
        let int: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| syntax())?
        };
        let frac: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| syntax())?
        };
        let numer = int
            .checked_mul(denom)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(|| FractionError::OutOfRange(s.to_string()))?;
        Fraction::new(numer, denom)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Render as a terminating decimal when the denominator allows it.
        let mut d = self.denom();
        for p in [2u64, 5] {
            while d.is_multiple_of(p) {
                d /= p;
            }
        }
        if d == 1 {
            write!(f, "{}", self.as_f64())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

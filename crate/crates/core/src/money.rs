//! Fixed-point money.
//!
//! Amounts are held as integer multiples of 1/10 000 of a cent so that sums
//! over houses, days and months are exact. Conversion to dollars happens only
//! when a report is rendered.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Number of internal units in one cent.
pub const UNITS_PER_CENT: i64 = 10_000;

/// A signed amount of money in cents, fixed-point with four decimal digits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cents(i64);

impl Cents {
    pub const ZERO: Cents = Cents(0);

    pub const fn from_units(units: i64) -> Self {
        Cents(units)
    }

    pub const fn units(self) -> i64 {
        self.0
    }

    /// Rounds a real-valued cent amount to the nearest unit (ties away from zero).
    pub fn from_f64(cents: f64) -> Self {
        debug_assert!(cents.is_finite(), "non-finite money amount {cents}");
        Cents((cents * UNITS_PER_CENT as f64).round() as i64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / UNITS_PER_CENT as f64
    }

    pub fn abs(self) -> Self {
        Cents(self.0.abs())
    }

    /// Renders the amount in cents with all four fractional digits.
    pub fn cents_string(self) -> String {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let per = UNITS_PER_CENT as u64;
        format!("{sign}{}.{:04}", abs / per, abs % per)
    }

    /// Renders the amount in dollars rounded to whole cents (half away from zero).
    pub fn dollars_string(self) -> String {
        let per = UNITS_PER_CENT as u64;
        let abs = self.0.unsigned_abs();
        let whole_cents = (abs + per / 2) / per;
        let sign = if self.0 < 0 && whole_cents > 0 { "-" } else { "" };
        format!("{sign}{}.{:02}", whole_cents / 100, whole_cents % 100)
    }

    pub fn as_dollars(self) -> f64 {
        self.as_f64() / 100.0
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.cents_string())
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

impl SubAssign for Cents {
    fn sub_assign(&mut self, rhs: Cents) {
        self.0 -= rhs.0;
    }
}

impl Neg for Cents {
    type Output = Cents;
    fn neg(self) -> Cents {
        Cents(-self.0)
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

/// Rounds `values` to fixed-point so that the rounded parts sum exactly to
/// `target`.
///
/// Each value is floored to a whole unit and the remaining units are handed
/// out by largest fractional remainder (ties to the lower index). A negative
/// remainder is taken back from the smallest fractional parts first.
pub fn apportion(values: &[f64], target: Cents) -> Vec<Cents> {
    let scale = UNITS_PER_CENT as f64;
    let mut floors: Vec<i64> = Vec::with_capacity(values.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let scaled = v * scale;
        let f = scaled.floor();
        floors.push(f as i64);
        remainders.push((i, scaled - f));
    }
    if values.is_empty() {
        return Vec::new();
    }
    let mut residual = target.0 - floors.iter().sum::<i64>();
    if residual > 0 {
        remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    } else {
        remainders.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    }
    let n = remainders.len();
    let mut k = 0;
    while residual != 0 {
        let idx = remainders[k % n].0;
        if residual > 0 {
            floors[idx] += 1;
            residual -= 1;
        } else {
            floors[idx] -= 1;
            residual += 1;
        }
        k += 1;
    }
    floors.into_iter().map(Cents).collect()
}

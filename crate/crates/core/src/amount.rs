//! Integer money amounts and report scaling.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// An exact amount in base currency units (whole dollars for the balance-sheet
/// examples, satoshi-like subunits for coin supply).
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Amount(pub i64);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub fn new(value: i64) -> Self {
        Amount(value)
    }

    pub fn value(self) -> i64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_add(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_add(rhs.0).map(Amount)
    }

    pub fn checked_sub(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_sub(rhs.0).map(Amount)
    }

    pub fn min(self, other: Amount) -> Amount {
        Amount(self.0.min(other.0))
    }

    pub fn max(self, other: Amount) -> Amount {
        Amount(self.0.max(other.0))
    }

    /// Renders the amount at the given report scale with comma grouping.
    pub fn display_scaled(self, scale: Scale) -> String {
        let div = scale.divisor();
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = group_thousands(abs / div);
        let frac = abs % div;
        if frac == 0 {
            format!("{sign}{whole}")
        } else {
            let width = scale.digits();
            let digits = format!("{frac:0width$}");
            format!("{sign}{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

fn group_thousands(mut n: u64) -> String {
    if n == 0 {
        return "0".to_string();
    }
    let mut groups = Vec::new();
    while n > 0 {
        groups.push(n % 1000);
        n /= 1000;
    }
    let mut out = groups.pop().unwrap().to_string();
    while let Some(g) = groups.pop() {
        out.push_str(&format!(",{g:03}"));
    }
    out
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_scaled(Scale::Units))
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0 + rhs.0)
    }
}

impl AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        self.0 += rhs.0;
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        Amount(self.0 - rhs.0)
    }
}

impl SubAssign for Amount {
    fn sub_assign(&mut self, rhs: Amount) {
        self.0 -= rhs.0;
    }
}

impl Neg for Amount {
    type Output = Amount;
    fn neg(self) -> Amount {
        Amount(-self.0)
    }
}

impl Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, |a, b| a + b)
    }
}

impl From<i64> for Amount {
    fn from(v: i64) -> Self {
        Amount(v)
    }
}

/// Display divisor for a report. Stored values are never scaled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub enum Scale {
    #[default]
    Units,
    Thousands,
}

impl Scale {
    pub fn divisor(self) -> u64 {
        match self {
            Scale::Units => 1,
            Scale::Thousands => 1_000,
        }
    }

    fn digits(self) -> usize {
        match self {
            Scale::Units => 0,
            Scale::Thousands => 3,
        }
    }

    /// Column header unit, e.g. `($)` or `(thousands $)`.
    pub fn header_unit(self) -> &'static str {
        match self {
            Scale::Units => "($)",
            Scale::Thousands => "(thousands $)",
        }
    }
}

impl TryFrom<u64> for Scale {
    type Error = String;

    fn try_from(v: u64) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Scale::Units),
            1000 => Ok(Scale::Thousands),
            other => Err(format!("unsupported scale {other}; expected 1 or 1000")),
        }
    }
}

impl From<Scale> for u64 {
    fn from(s: Scale) -> u64 {
        s.divisor()
    }
}

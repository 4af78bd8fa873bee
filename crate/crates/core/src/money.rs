//! Currency in integer minor units (cents).

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_cents(cents: i64) -> Self {
        Money(cents)
    }

    pub fn cents(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// `rate * self`, rounded half away from zero to the nearest cent.
    pub fn scale(self, rate: f64) -> Money {
        Money((self.0 as f64 * rate).round() as i64)
    }

    /// Nearest cent to a float amount. Used by generators only.
    pub fn from_f64(amount: f64) -> Money {
        Money((amount * 100.0).round() as i64)
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

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl FromStr for Money {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(format!("empty amount `{s}`"));
        }
        if frac.len() > 2 {
            return Err(format!("more than two decimals in `{s}`"));
        }
        let digits_ok = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if !digits_ok(whole) || !digits_ok(frac) {
            return Err(format!("not an amount: `{s}`"));
        }
        let w: i64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| format!("amount out of range: `{s}`"))?
        };
        let mut f: i64 = if frac.is_empty() { 0 } else { frac.parse().unwrap() };
        if frac.len() == 1 {
            f *= 10;
        }
        let cents = w
            .checked_mul(100)
            .and_then(|c| c.checked_add(f))
            .ok_or_else(|| format!("amount out of range: `{s}`"))?;
        Ok(Money(if neg { -cents } else { cents }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        assert_eq!("100".parse::<Money>().unwrap(), Money(10_000));
        assert_eq!("12.5".parse::<Money>().unwrap(), Money(1_250));
        assert_eq!("-0.07".parse::<Money>().unwrap(), Money(-7));
        assert_eq!(Money(-7).to_string(), "-0.07");
        assert_eq!(Money(123_456).to_string(), "1234.56");
        assert!("1.234".parse::<Money>().is_err());
        assert!("abc".parse::<Money>().is_err());
    }

    #[test]
    fn scale_rounds_to_cents() {
        assert_eq!(Money(10_000).scale(0.05), Money(500));
        assert_eq!(Money(8_000).scale(0.8), Money(6_400));
        assert_eq!(Money(1).scale(0.5), Money(1));
        assert_eq!(Money(-1).scale(0.5), Money(-1));
    }
}

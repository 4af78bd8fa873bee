//! Month arithmetic and the `DDMONYYYY` date form used in call logs.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

const MONTHS: [&str; 12] = [
    "JAN", "FEB", "MAR", "APR", "MAY", "JUN", "JUL", "AUG", "SEP", "OCT", "NOV", "DEC",
];

/// Parses `01MAY2017` (month abbreviation case-insensitive).
pub fn parse_ddmonyyyy(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if s.len() != 9 || !s.is_ascii() {
        return None;
    }
    let day: u32 = s[0..2].parse().ok()?;
    let mon = s[2..5].to_ascii_uppercase();
    let month = MONTHS.iter().position(|m| *m == mon)? as u32 + 1;
    if !s[5..9].bytes().all(|b| b.is_ascii_digit()) || !s[0..2].bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let year: i32 = s[5..9].parse().ok()?;
    NaiveDate::from_ymd_opt(year, month, day)
}

pub fn format_ddmonyyyy(d: NaiveDate) -> String {
    format!("{:02}{}{:04}", d.day(), MONTHS[d.month0() as usize], d.year())
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(YearMonth { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        YearMonth {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn plus(self, months: i32) -> Self {
        let idx = self.year * 12 + self.month as i32 - 1 + months;
        YearMonth {
            year: idx.div_euclid(12),
            month: idx.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn days(self) -> u32 {
        (self.plus(1).first_day() - self.first_day()).num_days() as u32
    }

    /// Months from `self` to `other` (positive when `other` is later).
    pub fn months_until(self, other: YearMonth) -> i32 {
        (other.year * 12 + other.month as i32) - (self.year * 12 + self.month as i32)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| format!("expected YYYY-MM, got `{s}`"))?;
        let year = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let month = m.parse().map_err(|_| format!("bad month in `{s}`"))?;
        YearMonth::new(year, month).ok_or_else(|| format!("month out of range in `{s}`"))
    }
}

impl TryFrom<String> for YearMonth {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<YearMonth> for String {
    fn from(m: YearMonth) -> String {
        m.to_string()
    }
}

/// Half-open date range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        DateWindow { start, end }
    }

    /// The `months` calendar months preceding `month`.
    pub fn months_before(month: YearMonth, months: u32) -> Self {
        DateWindow {
            start: month.plus(-(months as i32)).first_day(),
            end: month.first_day(),
        }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d < self.end
    }
}

/// A scoring timeframe: subjects get their card in `card_month`, and the
/// call network covers the `window_months` months before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeframe {
    pub name: String,
    pub card_month: YearMonth,
    pub window_months: u32,
}

impl Timeframe {
    pub fn window(&self) -> DateWindow {
        DateWindow::months_before(self.card_month, self.window_months)
    }

    /// `count` consecutive timeframes `t1, t2, ...` whose first window
    /// starts at `first_month`.
    pub fn consecutive(first_month: YearMonth, window_months: u32, count: usize) -> Vec<Timeframe> {
        (0..count)
            .map(|k| Timeframe {
                name: format!("t{}", k + 1),
                card_month: first_month.plus(window_months as i32 + k as i32),
                window_months,
            })
            .collect()
    }
}

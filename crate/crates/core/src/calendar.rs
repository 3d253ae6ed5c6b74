//! Civil dates, the shared trading calendar and day-index windows.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalendarError {
    #[error("invalid date `{0}` (expected YYYY-MM-DD)")]
    Parse(alloc::string::String),
    #[error("calendar is not strictly increasing at position {0}")]
    NotIncreasing(usize),
    #[error("calendar is empty")]
    Empty,
}

/// A proleptic Gregorian calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    year: i32,
    month: u8,
    day: u8,
}

fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        _ => 28,
    }
}

impl Date {
    pub fn new(year: i32, month: u8, day: u8) -> Option<Self> {
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return None;
        }
        Some(Self { year, month, day })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    pub fn day(self) -> u8 {
        self.day
    }

    /// The following calendar day.
    pub fn succ(self) -> Self {
        if self.day < days_in_month(self.year, self.month) {
            Self { day: self.day + 1, ..self }
        } else if self.month < 12 {
            Self { month: self.month + 1, day: 1, ..self }
        } else {
            Self { year: self.year + 1, month: 1, day: 1 }
        }
    }

    /// Day of week, 0 = Monday .. 6 = Sunday.
    pub fn weekday(self) -> u8 {
        // Sakamoto's method, shifted so that Monday is 0.
        const T: [i32; 12] = [0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4];
        let mut y = self.year;
        if self.month < 3 {
            y -= 1;
        }
        let sunday_based =
            (y + y.div_euclid(4) - y.div_euclid(100) + y.div_euclid(400) + T[self.month as usize - 1] + self.day as i32)
                .rem_euclid(7);
        ((sunday_based + 6) % 7) as u8
    }

    pub fn is_weekday(self) -> bool {
        self.weekday() < 5
    }

    fn same_month(self, other: Self) -> bool {
        self.year == other.year && self.month == other.month
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl FromStr for Date {
    type Err = CalendarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CalendarError::Parse(s.into());
        let s = s.trim();
        let bytes = s.as_bytes();
        if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
            return Err(err());
        }
        let digits = |r: core::ops::Range<usize>| -> Result<u32, CalendarError> {
            let part = &s[r];
            if !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            part.parse().map_err(|_| err())
        };
        let year = digits(0..4)? as i32;
        let month = digits(5..7)? as u8;
        let day = digits(8..10)? as u8;
        Date::new(year, month, day).ok_or_else(err)
    }
}

impl Serialize for Date {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Half-open range `[start, end)` of trading-day indices.
///
/// A window covers the returns realised on its days: the return of day `t`
/// is measured from the close of day `t - 1` to the close of day `t`, so a
/// window needs `start >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DayRange {
    pub start: usize,
    pub end: usize,
}

impl DayRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Slice a per-return-day series (element `t - 1` holds day `t`).
    pub fn slice<'a>(&self, series: &'a [f64]) -> &'a [f64] {
        &series[self.start - 1..self.end - 1]
    }
}

/// Strictly increasing list of trading days.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TradingCalendar {
    dates: Vec<Date>,
}

impl TradingCalendar {
    pub fn new(dates: Vec<Date>) -> Result<Self, CalendarError> {
        if dates.is_empty() {
            return Err(CalendarError::Empty);
        }
        if let Some(i) = dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(CalendarError::NotIncreasing(i + 1));
        }
        Ok(Self { dates })
    }

    /// Weekdays from `start` (inclusive), `n` of them.
    pub fn weekdays_from(start: Date, n: usize) -> Self {
        let mut dates = Vec::with_capacity(n);
        let mut d = start;
        while dates.len() < n {
            if d.is_weekday() {
                dates.push(d);
            }
            d = d.succ();
        }
        Self { dates }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn date(&self, index: usize) -> Date {
        self.dates[index]
    }

    pub fn index_of(&self, date: Date) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Index of the first trading day on or after `date`.
    pub fn first_on_or_after(&self, date: Date) -> Option<usize> {
        let i = self.dates.partition_point(|d| *d < date);
        (i < self.dates.len()).then_some(i)
    }

    /// Index of the last trading day on or before `date`.
    pub fn last_on_or_before(&self, date: Date) -> Option<usize> {
        self.dates.partition_point(|d| *d <= date).checked_sub(1)
    }

    /// True when `index` is the first trading day of its month. Day 0 counts
    /// as a month start.
    pub fn is_month_start(&self, index: usize) -> bool {
        index == 0 || !self.dates[index].same_month(self.dates[index - 1])
    }

    /// First trading day of every month, restricted to `[from, to]`.
    pub fn month_starts(&self, from: usize, to: usize) -> Vec<usize> {
        (from..=to.min(self.len().saturating_sub(1)))
            .filter(|&i| self.is_month_start(i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let d: Date = "2008-02-29".parse().unwrap();
        assert_eq!(alloc::format!("{d}"), "2008-02-29");
        assert!("2007-02-29".parse::<Date>().is_err());
        assert!("2007-2-1".parse::<Date>().is_err());
        assert!("20070201xx".parse::<Date>().is_err());
    }

    #[test]
    fn succ_rolls_over() {
        let d = Date::new(2019, 12, 31).unwrap();
        assert_eq!(d.succ(), Date::new(2020, 1, 1).unwrap());
        assert_eq!(Date::new(2020, 2, 28).unwrap().succ(), Date::new(2020, 2, 29).unwrap());
    }

    #[test]
    fn weekday_known_dates() {
        // 2018-06-29 was a Friday, 2003-01-01 a Wednesday.
        assert_eq!(Date::new(2018, 6, 29).unwrap().weekday(), 4);
        assert_eq!(Date::new(2003, 1, 1).unwrap().weekday(), 2);
        assert_eq!(Date::new(2000, 1, 2).unwrap().weekday(), 6);
    }

    #[test]
    fn calendar_rejects_duplicates() {
        let d = Date::new(2020, 1, 2).unwrap();
        assert_eq!(TradingCalendar::new(alloc::vec![d, d]), Err(CalendarError::NotIncreasing(1)));
    }

    #[test]
    fn month_starts_of_weekday_calendar() {
        let cal = TradingCalendar::weekdays_from(Date::new(2020, 1, 1).unwrap(), 70);
        let starts = cal.month_starts(1, cal.len() - 1);
        let dates: Vec<_> = starts.iter().map(|&i| cal.date(i)).collect();
        assert_eq!(
            dates,
            alloc::vec![
                Date::new(2020, 2, 3).unwrap(),
                Date::new(2020, 3, 2).unwrap(),
                Date::new(2020, 4, 1).unwrap()
            ]
        );
    }
}

//! Date and timestamp recognition. Clock times without an offset are read as UTC.

use std::ops::Range;
use std::sync::LazyLock;

use chrono::{FixedOffset, NaiveDate, NaiveDateTime, NaiveTime, TimeZone, Utc};
use regex::{Captures, Regex};

use crate::fhir::DateOrInstant;

static ISO: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b(\d{4})-(\d{2})-(\d{2})(?:[T ](\d{2}):(\d{2})(?::(\d{2}))?(Z|[+-]\d{2}:?\d{2})?)?",
    )
    .unwrap()
});
static US: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(\d{1,2})/(\d{1,2})/(\d{4})(?:,?\s+(\d{1,2}):(\d{2})(?::(\d{2}))?(?:\s*(am|pm)\b)?)?")
        .unwrap()
});
static MONTH_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d{1,2})/(\d{4})\b").unwrap());

fn num<T: std::str::FromStr>(c: &Captures, i: usize) -> Option<T> {
    c.get(i).and_then(|m| m.as_str().parse().ok())
}

fn instant(date: NaiveDate, c: &Captures, h: usize, meridiem: Option<&str>, offset: Option<&str>) -> Option<DateOrInstant> {
    let Some(mut hour) = num::<u32>(c, h) else {
        return Some(DateOrInstant::Date(date));
    };
    let minute: u32 = num(c, h + 1)?;
    let second: u32 = num(c, h + 2).unwrap_or(0);
    match meridiem.map(str::to_ascii_lowercase).as_deref() {
        Some("pm") if hour < 12 => hour += 12,
        Some("am") if hour == 12 => hour = 0,
        Some(_) if hour > 12 => return None,
        _ => {}
    }
    let naive = NaiveDateTime::new(date, NaiveTime::from_hms_opt(hour, minute, second)?);
    let utc = match offset {
        None | Some("Z") => Utc.from_utc_datetime(&naive),
        Some(o) => {
            let digits: String = o.chars().filter(char::is_ascii_digit).collect();
            let hh: i32 = digits[..2].parse().ok()?;
            let mm: i32 = digits[2..].parse().ok()?;
            let sign = if o.starts_with('-') { -1 } else { 1 };
            let off = FixedOffset::east_opt(sign * (hh * 3600 + mm * 60))?;
            off.from_local_datetime(&naive).single()?.with_timezone(&Utc)
        }
    };
    Some(DateOrInstant::Instant(utc))
}

fn from_iso(c: &Captures) -> Option<DateOrInstant> {
    let date = NaiveDate::from_ymd_opt(num(c, 1)?, num(c, 2)?, num(c, 3)?)?;
    instant(date, c, 4, None, c.get(7).map(|m| m.as_str()))
}

fn from_us(c: &Captures) -> Option<DateOrInstant> {
    let date = NaiveDate::from_ymd_opt(num(c, 3)?, num(c, 1)?, num(c, 2)?)?;
    instant(date, c, 4, c.get(7).map(|m| m.as_str()), None)
}

/// All recognizable dates in the text, in order of appearance, without overlaps.
pub fn find_dates(text: &str) -> Vec<(Range<usize>, DateOrInstant)> {
    let mut found: Vec<(Range<usize>, DateOrInstant)> = Vec::new();
    let overlaps = |found: &[(Range<usize>, DateOrInstant)], r: &Range<usize>| {
        found.iter().any(|(f, _)| f.start < r.end && r.start < f.end)
    };
    for c in ISO.captures_iter(text) {
        let m = c.get(0).unwrap();
        if let Some(d) = from_iso(&c) {
            found.push((m.range(), d));
        }
    }
    for c in US.captures_iter(text) {
        let m = c.get(0).unwrap();
        if let Some(d) = from_us(&c) {
            if !overlaps(&found, &m.range()) {
                found.push((m.range(), d));
            }
        }
    }
    for c in MONTH_YEAR.captures_iter(text) {
        let m = c.get(0).unwrap();
        let (Some(mo), Some(y)) = (num::<u32>(&c, 1), num::<i32>(&c, 2)) else {
            continue;
        };
        if (1..=12).contains(&mo) && !overlaps(&found, &m.range()) {
            found.push((m.range(), DateOrInstant::YearMonth(y, mo)));
        }
    }
    found.sort_by_key(|(r, _)| r.start);
    found
}

/// Parses a string that is exactly one date (surrounding whitespace allowed).
pub fn parse_date(s: &str) -> Option<DateOrInstant> {
    let t = s.trim();
    let dates = find_dates(t);
    match dates.as_slice() {
        [(r, d)] if r.start == 0 && r.end == t.len() => Some(*d),
        _ => None,
    }
}

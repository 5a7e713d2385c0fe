//! Timestamp conversion between internal epoch seconds and the two wire
//! formats the CSV layer supports.
//!
//! The default wire format is `MM.DD.YYYY HH:MM` (e.g. `11.20.2022 13:01`),
//! minute resolution; an optional `:SS` suffix is accepted on input. The
//! alternative is ISO 8601 (`2022-11-20T13:01:00`). All times are naive UTC;
//! the data carries no timezone and analyses only use differences and
//! calendar buckets.

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike};

use crate::error::{Error, Result};

/// Wire format tag for timestamps and dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TimestampFormat {
    /// `MM.DD.YYYY HH:MM` timestamps, `MM.DD.YYYY` dates.
    Paper,
    /// `YYYY-MM-DDTHH:MM:SS` timestamps, `YYYY-MM-DD` dates.
    Iso8601,
}

fn naive(epoch: i64) -> NaiveDateTime {
    DateTime::from_timestamp(epoch, 0)
        .expect("epoch seconds out of chrono range")
        .naive_utc()
}

/// Formats epoch seconds as a timestamp in the given wire format.
/// The paper format truncates to minute resolution.
pub fn format_timestamp(epoch: i64, fmt: TimestampFormat) -> String {
    let dt = naive(epoch);
    match fmt {
        TimestampFormat::Paper => dt.format("%m.%d.%Y %H:%M").to_string(),
        TimestampFormat::Iso8601 => dt.format("%Y-%m-%dT%H:%M:%S").to_string(),
    }
}

/// Formats epoch seconds as a calendar date in the given wire format.
pub fn format_date(epoch: i64, fmt: TimestampFormat) -> String {
    let dt = naive(epoch);
    match fmt {
        TimestampFormat::Paper => dt.format("%m.%d.%Y").to_string(),
        TimestampFormat::Iso8601 => dt.format("%Y-%m-%d").to_string(),
    }
}

/// Parses a wire timestamp back to epoch seconds. The paper format accepts
/// an optional seconds component (`11.20.2022 13:01:05`).
pub fn parse_timestamp(text: &str, fmt: TimestampFormat) -> Result<i64> {
    let parsed = match fmt {
        TimestampFormat::Paper => NaiveDateTime::parse_from_str(text, "%m.%d.%Y %H:%M:%S")
            .or_else(|_| NaiveDateTime::parse_from_str(text, "%m.%d.%Y %H:%M")),
        TimestampFormat::Iso8601 => NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S")
            .or_else(|_| NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M")),
    };
    parsed
        .map(|dt| dt.and_utc().timestamp())
        .map_err(|_| Error::input(format!("invalid timestamp {text:?}")))
}

/// Parses a wire date to the epoch seconds of its midnight.
pub fn parse_date(text: &str, fmt: TimestampFormat) -> Result<i64> {
    let pattern = match fmt {
        TimestampFormat::Paper => "%m.%d.%Y",
        TimestampFormat::Iso8601 => "%Y-%m-%d",
    };
    NaiveDate::parse_from_str(text, pattern)
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
        .map_err(|_| Error::input(format!("invalid date {text:?}")))
}

/// Epoch seconds for a calendar date and time of day (naive UTC).
pub fn epoch_for(year: i32, month: u32, day: u32, hour: u32, minute: u32) -> i64 {
    NaiveDate::from_ymd_opt(year, month, day)
        .and_then(|d| d.and_hms_opt(hour, minute, 0))
        .expect("invalid calendar date")
        .and_utc()
        .timestamp()
}

/// Hour of day (0-23) of an epoch timestamp.
pub fn hour_of_day(epoch: i64) -> u32 {
    naive(epoch).hour()
}

/// Day of week (0 = Monday .. 6 = Sunday) of an epoch timestamp.
pub fn day_of_week(epoch: i64) -> u32 {
    naive(epoch).weekday().num_days_from_monday()
}

/// Truncates epoch seconds to minute resolution.
pub fn truncate_to_minute(epoch: i64) -> i64 {
    epoch - epoch.rem_euclid(60)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_format_round_trip() {
        let epoch = epoch_for(2022, 11, 20, 13, 1);
        assert_eq!(format_timestamp(epoch, TimestampFormat::Paper), "11.20.2022 13:01");
        assert_eq!(parse_timestamp("11.20.2022 13:01", TimestampFormat::Paper).unwrap(), epoch);
    }

    #[test]
    fn paper_format_accepts_optional_seconds() {
        let epoch = epoch_for(2022, 11, 20, 13, 1) + 5;
        assert_eq!(parse_timestamp("11.20.2022 13:01:05", TimestampFormat::Paper).unwrap(), epoch);
    }

    #[test]
    fn iso_format_round_trip() {
        let epoch = epoch_for(2022, 11, 20, 13, 1);
        assert_eq!(format_timestamp(epoch, TimestampFormat::Iso8601), "2022-11-20T13:01:00");
        assert_eq!(
            parse_timestamp("2022-11-20T13:01:00", TimestampFormat::Iso8601).unwrap(),
            epoch
        );
    }

    #[test]
    fn dates_and_buckets() {
        let epoch = epoch_for(2022, 11, 20, 13, 1);
        assert_eq!(format_date(epoch, TimestampFormat::Paper), "11.20.2022");
        assert_eq!(format_date(epoch, TimestampFormat::Iso8601), "2022-11-20");
        assert_eq!(hour_of_day(epoch), 13);
        // 2022-11-20 is a Sunday.
        assert_eq!(day_of_week(epoch), 6);
        assert_eq!(truncate_to_minute(epoch + 59), epoch);
    }
}

//! Local-time helpers: time of day and the workday indicator.

use chrono::{DateTime, Datelike, Duration, NaiveDate, Timelike, Utc, Weekday};

pub type Timestamp = DateTime<Utc>;

/// Monday to Friday.
pub fn weekdays_are_workdays(date: NaiveDate) -> bool {
    !matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Maps UTC instants onto local calendar quantities.
#[derive(Clone, Copy)]
pub struct CalendarContext {
    pub utc_offset_hours: i32,
    pub workday: fn(NaiveDate) -> bool,
}

impl std::fmt::Debug for CalendarContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CalendarContext")
            .field("utc_offset_hours", &self.utc_offset_hours)
            .finish_non_exhaustive()
    }
}

impl Default for CalendarContext {
    fn default() -> Self {
        Self::with_offset(0)
    }
}

impl CalendarContext {
    pub fn with_offset(utc_offset_hours: i32) -> Self {
        Self {
            utc_offset_hours,
            workday: weekdays_are_workdays,
        }
    }

    pub fn local(&self, t: Timestamp) -> chrono::NaiveDateTime {
        t.naive_utc() + Duration::hours(i64::from(self.utc_offset_hours))
    }

    /// Local hour of day in `[0, 24)`.
    pub fn time_of_day(&self, t: Timestamp) -> f64 {
        let local = self.local(t);
        f64::from(local.hour())
            + f64::from(local.minute()) / 60.0
            + f64::from(local.second()) / 3600.0
    }

    pub fn is_workday(&self, t: Timestamp) -> bool {
        (self.workday)(self.local(t).date())
    }
}

/// Free-function form of [`CalendarContext::time_of_day`].
pub fn time_of_day(t: Timestamp, ctx: &CalendarContext) -> f64 {
    ctx.time_of_day(t)
}

pub fn add_hours(t: Timestamp, hours: i64) -> Timestamp {
    t + Duration::hours(hours)
}

/// Whole hours from `from` to `to`, or `None` when they are not an integer
/// number of hours apart.
pub fn hours_between(from: Timestamp, to: Timestamp) -> Option<i64> {
    let secs = (to - from).num_seconds();
    (secs % 3600 == 0).then_some(secs / 3600)
}

pub fn format_timestamp(t: Timestamp) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Accepts RFC 3339 (with offset) or a naive `YYYY-MM-DD[T ]HH:MM[:SS]`,
/// which is read as UTC.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}

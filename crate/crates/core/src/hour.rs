//! UTC hour buckets, the finest grain of batches and snapshots.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const HOUR_MS: i64 = 3_600_000;

/// A calendar hour in UTC. Field order makes the derived `Ord` chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HourBucket {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid hour bucket {0:?} (expected YYYY-MM-DDTHH)")]
pub struct HourParseError(pub String);

impl HourBucket {
    pub fn new(year: i32, month: u32, day: u32, hour: u32) -> Option<HourBucket> {
        NaiveDate::from_ymd_opt(year, month, day)?;
        (hour < 24).then_some(HourBucket { year, month, day, hour })
    }

    pub fn from_ts_ms(ts: i64) -> HourBucket {
        let dt = DateTime::from_timestamp_millis(ts).expect("timestamp within chrono range");
        HourBucket {
            year: dt.year(),
            month: dt.month(),
            day: dt.day(),
            hour: dt.hour(),
        }
    }

    pub fn start_ms(&self) -> i64 {
        NaiveDate::from_ymd_opt(self.year, self.month, self.day)
            .and_then(|d| d.and_hms_opt(self.hour, 0, 0))
            .expect("valid bucket")
            .and_utc()
            .timestamp_millis()
    }

    /// Exclusive end.
    pub fn end_ms(&self) -> i64 {
        self.start_ms() + HOUR_MS
    }

    pub fn contains(&self, ts: i64) -> bool {
        (self.start_ms()..self.end_ms()).contains(&ts)
    }

    pub fn next(&self) -> HourBucket {
        HourBucket::from_ts_ms(self.end_ms())
    }
}

impl fmt::Display for HourBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}T{:02}", self.year, self.month, self.day, self.hour)
    }
}

impl FromStr for HourBucket {
    type Err = HourParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || HourParseError(s.to_string());
        let (date, hour) = s.split_once('T').ok_or_else(err)?;
        let mut parts = date.splitn(3, '-');
        let mut field = || parts.next().ok_or_else(err);
        let year = field()?.parse().map_err(|_| err())?;
        let month = field()?.parse().map_err(|_| err())?;
        let day = field()?.parse().map_err(|_| err())?;
        let hour = hour.parse().map_err(|_| err())?;
        HourBucket::new(year, month, day, hour).ok_or_else(err)
    }
}

impl Serialize for HourBucket {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HourBucket {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

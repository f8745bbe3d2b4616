use std::collections::BTreeMap;

use crate::hour::HourBucket;

type Days = BTreeMap<u32, BTreeMap<u32, usize>>;

/// year → month → day → hour index over snapshots. Each hour leaf holds
/// the position of exactly one snapshot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TimeTree {
    years: BTreeMap<i32, BTreeMap<u32, Days>>,
    len: usize,
}

impl TimeTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Attaches `snapshot` at `hour`. Returns the existing snapshot if the hour is taken.
    pub fn insert(&mut self, hour: HourBucket, snapshot: usize) -> Result<(), usize> {
        let hours = self
            .years
            .entry(hour.year)
            .or_default()
            .entry(hour.month)
            .or_default()
            .entry(hour.day)
            .or_default();
        if let Some(&existing) = hours.get(&hour.hour) {
            return Err(existing);
        }
        hours.insert(hour.hour, snapshot);
        self.len += 1;
        Ok(())
    }

    pub fn get(&self, hour: HourBucket) -> Option<usize> {
        self.years
            .get(&hour.year)?
            .get(&hour.month)?
            .get(&hour.day)?
            .get(&hour.hour)
            .copied()
    }

    /// Leaves with `from <= hour <= to`, chronological.
    pub fn range(&self, from: HourBucket, to: HourBucket) -> Vec<(HourBucket, usize)> {
        let mut out = Vec::new();
        for (&year, months) in self.years.range(from.year..=to.year) {
            for (&month, days) in months {
                if (year, month) < (from.year, from.month) || (year, month) > (to.year, to.month) {
                    continue;
                }
                for (&day, hours) in days {
                    let ymd = (year, month, day);
                    if ymd < (from.year, from.month, from.day) || ymd > (to.year, to.month, to.day) {
                        continue;
                    }
                    for (&hour, &snap) in hours {
                        let h = HourBucket { year, month, day, hour };
                        if h >= from && h <= to {
                            out.push((h, snap));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (HourBucket, usize)> + '_ {
        self.years.iter().flat_map(|(&year, months)| {
            months.iter().flat_map(move |(&month, days)| {
                days.iter().flat_map(move |(&day, hours)| {
                    hours
                        .iter()
                        .map(move |(&hour, &snap)| (HourBucket { year, month, day, hour }, snap))
                })
            })
        })
    }

    pub fn first(&self) -> Option<HourBucket> {
        self.iter().next().map(|(h, _)| h)
    }

    pub fn last(&self) -> Option<HourBucket> {
        self.iter().last().map(|(h, _)| h)
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::feed_model::{parse_context, ContextTuple, ParseError, WireFormat};
use crate::hour::HourBucket;

/// One hour of contextualized tuples, the raw material of a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub batch_id: u64,
    pub hour: HourBucket,
    pub tuples: Vec<ContextTuple>,
    pub closed: bool,
}

#[derive(Debug, Error)]
pub enum BatchFileError {
    #[error("missing or malformed `#batch <id> <hour>` header")]
    Header,
    #[error("line {line}: {source}")]
    Tuple { line: usize, source: ParseError },
}

impl Batch {
    /// `#batch <id> <YYYY-MM-DDTHH>` followed by one wire line per tuple.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#batch {} {}", self.batch_id, self.hour);
        for t in &self.tuples {
            out.push_str(&t.to_wire());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Batch, BatchFileError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(BatchFileError::Header)?;
        let mut parts = header.strip_prefix("#batch ").ok_or(BatchFileError::Header)?.split_whitespace();
        let batch_id = parts.next().and_then(|s| s.parse().ok()).ok_or(BatchFileError::Header)?;
        let hour = parts.next().and_then(|s| s.parse().ok()).ok_or(BatchFileError::Header)?;
        let mut tuples = Vec::new();
        for (i, line) in lines {
            if crate::feed_model::is_skippable(line) {
                continue;
            }
            tuples.push(parse_context(line).map_err(|source| BatchFileError::Tuple { line: i + 1, source })?);
        }
        Ok(Batch {
            batch_id,
            hour,
            tuples,
            closed: true,
        })
    }
}

/// Retains tuples per hour and closes an hour once the watermark has passed its end.
#[derive(Debug, Default)]
pub struct BatchAssembler {
    open: BTreeMap<HourBucket, Vec<ContextTuple>>,
    next_id: u64,
}

impl BatchAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, t: ContextTuple) {
        self.open.entry(HourBucket::from_ts_ms(t.tuple.ts)).or_default().push(t);
    }

    pub fn open_hours(&self) -> usize {
        self.open.len()
    }

    /// Emits, in hour order, every open hour whose end the watermark has reached.
    pub fn close_ready(&mut self, watermark: i64) -> Vec<Batch> {
        let mut out = Vec::new();
        while let Some(entry) = self.open.first_entry() {
            if watermark < entry.key().end_ms() {
                break;
            }
            let hour = *entry.key();
            let tuples = entry.remove();
            out.push(Batch {
                batch_id: self.next_id,
                hour,
                tuples,
                closed: true,
            });
            self.next_id += 1;
        }
        out
    }
}

/// Buckets an ordered stream and returns the batches `watermark` closes.
pub fn assemble_batches<I>(stream: I, watermark: i64) -> Vec<Batch>
where
    I: IntoIterator<Item = ContextTuple>,
{
    let mut asm = BatchAssembler::new();
    for t in stream {
        asm.add(t);
    }
    asm.close_ready(watermark)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feed_model::{CleanTuple, MotionLabel};
    use crate::hour::HOUR_MS;

    const H: i64 = 1_465_387_200_000;

    fn ctx(ts: i64) -> ContextTuple {
        ContextTuple {
            tuple: CleanTuple {
                route_id: "r1".into(),
                route_number: "1".into(),
                vehicle_id: "bus".into(),
                lat: 46.0,
                lon: -64.0,
                ts,
                arrival_seq: 0,
            },
            label: MotionLabel::Move,
            dist_prev_m: Some(20.0),
        }
    }

    #[test]
    fn two_hours_two_batches() {
        let batches = assemble_batches([ctx(H), ctx(H + 10), ctx(H + HOUR_MS + 5)], H + 2 * HOUR_MS + 1);
        assert_eq!(batches.len(), 2);
        assert_eq!(batches[0].tuples.len(), 2);
        assert_eq!(batches[0].batch_id, 0);
        assert_eq!(batches[1].batch_id, 1);
        assert!(batches[0].hour < batches[1].hour);
        assert!(batches.iter().all(|b| b.closed));
    }

    #[test]
    fn empty_hour_produces_no_batch() {
        let batches = assemble_batches([ctx(H), ctx(H + 2 * HOUR_MS)], H + 3 * HOUR_MS);
        assert_eq!(batches.len(), 2);
        assert_eq!(batches[1].hour, HourBucket::from_ts_ms(H + 2 * HOUR_MS));
    }

    #[test]
    fn hour_stays_open_until_watermark_reaches_end() {
        let mut asm = BatchAssembler::new();
        asm.add(ctx(H));
        assert!(asm.close_ready(H + HOUR_MS - 1).is_empty());
        assert_eq!(asm.close_ready(H + HOUR_MS).len(), 1);
        assert!(asm.close_ready(i64::MAX).is_empty());
    }

    #[test]
    fn file_round_trip() {
        let b = assemble_batches([ctx(H), ctx(H + 5000)], i64::MAX).remove(0);
        let text = b.to_text();
        assert!(text.starts_with("#batch 0 2016-06-08T12\n"));
        assert_eq!(Batch::parse(&text).unwrap(), b);
    }
}

use std::collections::{BTreeMap, HashMap};

use super::watermark::Watermark;
use crate::feed_model::{CleanTuple, RejectReason, RejectRecord, Stage};

/// Buffers tuples until the watermark guarantees nothing earlier can still
/// arrive, then releases them in `(ts, vehicle_id)` order.
#[derive(Debug, Default)]
pub struct Reorderer {
    pending: BTreeMap<(i64, String), CleanTuple>,
    last_emitted: HashMap<String, i64>,
}

fn fabric_reject(t: &CleanTuple, reason: RejectReason) -> RejectRecord {
    RejectRecord {
        raw: t.to_raw(),
        reason,
        stage: Stage::Fabric,
    }
}

impl Reorderer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Accepts `t` unless it is already behind `watermark`.
    pub fn insert(&mut self, t: CleanTuple, watermark: i64) -> Result<(), RejectRecord> {
        if t.ts < watermark {
            return Err(fabric_reject(&t, RejectReason::LateDrop));
        }
        let key = (t.ts, t.vehicle_id.clone());
        if self.pending.contains_key(&key) {
            return Err(fabric_reject(&t, RejectReason::Duplicate));
        }
        self.pending.insert(key, t);
        Ok(())
    }

    /// Releases every pending tuple with `ts < watermark`.
    pub fn release(&mut self, watermark: i64) -> Vec<CleanTuple> {
        let mut out = Vec::new();
        while let Some(entry) = self.pending.first_entry() {
            if entry.key().0 >= watermark {
                break;
            }
            let t = entry.remove();
            let prev = self.last_emitted.insert(t.vehicle_id.clone(), t.ts);
            debug_assert!(prev.is_none_or(|p| p < t.ts), "per-vehicle order violated");
            out.push(t);
        }
        out
    }
}

/// Reorders a single-source stream under `lateness_bound_s`.
pub fn reorder<I>(stream: I, lateness_bound_s: f64) -> (Vec<CleanTuple>, Vec<RejectRecord>)
where
    I: IntoIterator<Item = CleanTuple>,
{
    let mut wm = Watermark::new([0], lateness_bound_s);
    let mut buf = Reorderer::new();
    let mut out = Vec::new();
    let mut late = Vec::new();
    for t in stream {
        let ts = t.ts;
        if let Err(r) = buf.insert(t, wm.current()) {
            late.push(r);
            continue;
        }
        let w = wm.observe(0, ts);
        out.extend(buf.release(w));
    }
    out.extend(buf.release(wm.close(0)));
    (out, late)
}

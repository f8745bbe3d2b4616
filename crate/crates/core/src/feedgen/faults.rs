use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trips::GroundTruth;
use super::ConfigError;
use crate::feed_model::{RawTuple, WireFormat};

#[derive(Debug, Clone, PartialEq)]
pub struct FaultProfile {
    pub duplicate_rate: f64,
    pub drop_rate: f64,
    pub corrupt_rate: f64,
    /// Upper bound of the uniform arrival delay, seconds.
    pub max_lateness_s: f64,
    /// Never drop a trajectory's first or last tick, nor two consecutive ticks.
    pub isolated_drops: bool,
    pub rng_seed: u64,
}

impl Default for FaultProfile {
    fn default() -> Self {
        FaultProfile {
            duplicate_rate: 0.0,
            drop_rate: 0.0,
            corrupt_rate: 0.0,
            max_lateness_s: 0.0,
            isolated_drops: false,
            rng_seed: 0,
        }
    }
}

impl FaultProfile {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, p) in [
            ("duplicate_rate", self.duplicate_rate),
            ("drop_rate", self.drop_rate),
            ("corrupt_rate", self.corrupt_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::new(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if !(self.max_lateness_s >= 0.0 && self.max_lateness_s.is_finite()) {
            return Err(ConfigError::new("max_lateness must be a non-negative number of seconds"));
        }
        Ok(())
    }
}

/// Core column a corruption rewrote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoreField {
    RouteId,
    VehicleId,
    Lat,
    Lon,
    Ts,
}

impl CoreField {
    pub fn as_str(self) -> &'static str {
        match self {
            CoreField::RouteId => "route_id",
            CoreField::VehicleId => "vehicle_id",
            CoreField::Lat => "lat",
            CoreField::Lon => "lon",
            CoreField::Ts => "ts",
        }
    }
}

/// Whether a corruption blanks the field or puts an out-of-domain value in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorruptClass {
    Missing,
    Wrong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultKind {
    Drop,
    Duplicate,
    Corrupt(CoreField, CorruptClass),
    /// Arrived after a tuple with a larger timestamp.
    Late,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::Drop => f.write_str("drop"),
            FaultKind::Duplicate => f.write_str("duplicate"),
            FaultKind::Late => f.write_str("late"),
            FaultKind::Corrupt(field, class) => write!(
                f,
                "corrupt:{}:{}",
                field.as_str(),
                match class {
                    CorruptClass::Missing => "missing",
                    CorruptClass::Wrong => "wrong",
                }
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultRecord {
    pub kind: FaultKind,
    pub vehicle_id: String,
    /// Ground-truth timestamp of the affected tuple.
    pub ts: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feed {
    /// Wire lines in arrival order.
    pub lines: Vec<String>,
    pub ledger: Vec<FaultRecord>,
}

impl Feed {
    pub fn count(&self, pred: impl Fn(&FaultKind) -> bool) -> usize {
        self.ledger.iter().filter(|r| pred(&r.kind)).count()
    }

    pub fn drops(&self) -> usize {
        self.count(|k| *k == FaultKind::Drop)
    }

    pub fn duplicates(&self) -> usize {
        self.count(|k| *k == FaultKind::Duplicate)
    }

    pub fn corruptions(&self) -> usize {
        self.count(|k| matches!(k, FaultKind::Corrupt(..)))
    }

    pub fn feed_text(&self) -> String {
        let mut out = String::with_capacity(self.lines.iter().map(|l| l.len() + 1).sum());
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    pub fn ledger_text(&self) -> String {
        let mut out = String::from("# kind,vehicle_id,ts\n");
        for r in &self.ledger {
            let _ = writeln!(out, "{},{},{}", r.kind, r.vehicle_id, r.ts);
        }
        out
    }
}

const CORRUPTIONS: [(CoreField, CorruptClass); 9] = [
    (CoreField::RouteId, CorruptClass::Missing),
    (CoreField::RouteId, CorruptClass::Wrong),
    (CoreField::VehicleId, CorruptClass::Missing),
    (CoreField::Lat, CorruptClass::Missing),
    (CoreField::Lat, CorruptClass::Wrong),
    (CoreField::Lon, CorruptClass::Missing),
    (CoreField::Lon, CorruptClass::Wrong),
    (CoreField::Ts, CorruptClass::Missing),
    (CoreField::Ts, CorruptClass::Wrong),
];

/// Turns ground truth into an arrival-ordered feed.
///
/// Per tuple, in `(ts, vehicle_id)` order, at most one of drop, duplicate and
/// corrupt fires (tried in that order); every surviving line then gets an
/// arrival delay drawn uniformly from `[0, max_lateness_s]`. Timestamps are
/// never rewritten by the delay.
pub fn emit_feed(truth: &GroundTruth, faults: &FaultProfile) -> Result<Feed, ConfigError> {
    faults.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(faults.rng_seed);
    let max_delay_ms = (faults.max_lateness_s * 1000.0).round() as i64;

    // tick index of each tuple inside its own trajectory, and trajectory length
    let mut position: HashMap<(&str, i64), (usize, usize)> = HashMap::new();
    for t in &truth.trajectories {
        for (i, c) in t.tuples.iter().enumerate() {
            position.insert((t.vehicle_id.as_str(), c.tuple.ts), (i, t.tuples.len()));
        }
    }
    let mut last_dropped: HashMap<&str, usize> = HashMap::new();

    // (arrival key, emission index, truth ts, vehicle, line)
    let mut pending: Vec<(i64, usize, i64, &str, String)> = Vec::new();
    let mut ledger = Vec::new();

    for ctx in truth.ordered() {
        let t = &ctx.tuple;
        let vehicle = t.vehicle_id.as_str();
        let record = |kind| FaultRecord {
            kind,
            vehicle_id: t.vehicle_id.clone(),
            ts: t.ts,
        };

        if faults.drop_rate > 0.0 && rng.gen_bool(faults.drop_rate) {
            let allowed = !faults.isolated_drops || {
                let (i, len) = position[&(vehicle, t.ts)];
                let adjacent = i > 0 && last_dropped.get(vehicle) == Some(&(i - 1));
                i > 0 && i + 1 < len && !adjacent
            };
            if allowed {
                last_dropped.insert(vehicle, position[&(vehicle, t.ts)].0);
                ledger.push(record(FaultKind::Drop));
                continue;
            }
        }

        let mut raw = t.to_raw();
        let mut copies = 1;
        if faults.duplicate_rate > 0.0 && rng.gen_bool(faults.duplicate_rate) {
            copies = 2;
            ledger.push(record(FaultKind::Duplicate));
        } else if faults.corrupt_rate > 0.0 && rng.gen_bool(faults.corrupt_rate) {
            let (field, class) = CORRUPTIONS[rng.gen_range(0..CORRUPTIONS.len())];
            corrupt(&mut raw, field, class, truth, &mut rng);
            ledger.push(record(FaultKind::Corrupt(field, class)));
        }

        let delay = if max_delay_ms > 0 { rng.gen_range(0..=max_delay_ms) } else { 0 };
        let line = raw.to_wire();
        for _ in 0..copies {
            pending.push((t.ts + delay, pending.len(), t.ts, vehicle, line.clone()));
        }
    }

    pending.sort_by_key(|p| (p.0, p.1));
    let mut max_ts = i64::MIN;
    let mut lines = Vec::with_capacity(pending.len());
    for (_, _, ts, vehicle, line) in pending {
        if ts < max_ts {
            ledger.push(FaultRecord {
                kind: FaultKind::Late,
                vehicle_id: vehicle.to_string(),
                ts,
            });
        }
        max_ts = max_ts.max(ts);
        lines.push(line);
    }
    Ok(Feed { lines, ledger })
}

fn corrupt(raw: &mut RawTuple, field: CoreField, class: CorruptClass, truth: &GroundTruth, rng: &mut ChaCha8Rng) {
    use CorruptClass::*;
    match (field, class) {
        (CoreField::RouteId, Missing) => raw.route_id.clear(),
        (CoreField::RouteId, Wrong) => raw.route_id = format!("x{}", raw.route_id),
        (CoreField::VehicleId, _) => raw.vehicle_id.clear(),
        (CoreField::Lat, Missing) => raw.lat = None,
        (CoreField::Lat, Wrong) => raw.lat = Some(rng.gen_range(90.5..179.0)),
        (CoreField::Lon, Missing) => raw.lon = None,
        (CoreField::Lon, Wrong) => raw.lon = Some(rng.gen_range(180.5..359.0)),
        (CoreField::Ts, Missing) => raw.ts = None,
        (CoreField::Ts, Wrong) => {
            raw.ts = Some(truth.session.start_ms - rng.gen_range(1..=86_400) * 1000);
        }
    }
}

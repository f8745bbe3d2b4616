//! Tuple schema for every pipeline stage and the line-oriented wire format.
//!
//! A feed line is `route_id,route_number,vehicle_id,lat,lon,ts` followed by
//! zero or more `key=value` extras. Empty core columns are legal on the wire
//! (they are a cleaning concern), non-numeric coordinates or timestamps are not.

use std::fmt;
use std::io::BufRead;

use thiserror::Error;

/// Names of the six core columns, in wire order.
pub const CORE_COLUMNS: [&str; 6] = ["route_id", "route_number", "vehicle_id", "lat", "lon", "ts"];

const LABEL_KEY: &str = "label";
const DIST_KEY: &str = "dist";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("expected at least {expected} core columns, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("column `{column}` is not a valid number: {value:?}")]
    NotNumeric { column: &'static str, value: String },
    #[error("unknown motion label {0:?}")]
    BadLabel(String),
}

/// A transit observation as it arrives from a vehicle, possibly broken.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTuple {
    pub route_id: String,
    pub route_number: String,
    pub vehicle_id: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub ts: Option<i64>,
    pub extras: Vec<(String, String)>,
    /// Position in the ingesting node's arrival order. Not part of the wire format.
    pub arrival_seq: u64,
}

/// A tuple that passed every cleaning step.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanTuple {
    pub route_id: String,
    pub route_number: String,
    pub vehicle_id: String,
    pub lat: f64,
    pub lon: f64,
    pub ts: i64,
    pub arrival_seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MotionLabel {
    Stop,
    Move,
}

impl MotionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionLabel::Stop => "stop",
            MotionLabel::Move => "move",
        }
    }
}

impl fmt::Display for MotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MotionLabel {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stop" => Ok(MotionLabel::Stop),
            "move" => Ok(MotionLabel::Move),
            other => Err(ParseError::BadLabel(other.to_string())),
        }
    }
}

/// A clean tuple labelled as stop or move relative to its vehicle's predecessor.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextTuple {
    pub tuple: CleanTuple,
    pub label: MotionLabel,
    /// Meters to the previous tuple of the same vehicle; `None` for a trajectory's first tuple.
    pub dist_prev_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    Duplicate,
    MissingAttribute,
    WrongValue,
    LateDrop,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Duplicate => "duplicate",
            RejectReason::MissingAttribute => "missing_attribute",
            RejectReason::WrongValue => "wrong_value",
            RejectReason::LateDrop => "late_drop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Edge,
    Fabric,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Edge => "edge",
            Stage::Fabric => "fabric",
        }
    }
}

/// Audit entry for a tuple that left the pipeline without being emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectRecord {
    pub raw: RawTuple,
    pub reason: RejectReason,
    pub stage: Stage,
}

impl RejectRecord {
    /// `reason,stage,<wire line>`
    pub fn to_line(&self) -> String {
        format!("{},{},{}", self.reason.as_str(), self.stage.as_str(), self.raw.to_wire())
    }
}

/// Anything that can be written as one feed line.
pub trait WireFormat {
    fn to_wire(&self) -> String;
}

fn fmt_opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn push_extras(line: &mut String, extras: &[(String, String)]) {
    for (k, v) in extras {
        line.push(',');
        line.push_str(k);
        line.push('=');
        line.push_str(v);
    }
}

impl WireFormat for RawTuple {
    fn to_wire(&self) -> String {
        let mut line = format!(
            "{},{},{},{},{},{}",
            self.route_id,
            self.route_number,
            self.vehicle_id,
            fmt_opt(&self.lat),
            fmt_opt(&self.lon),
            fmt_opt(&self.ts)
        );
        push_extras(&mut line, &self.extras);
        line
    }
}

impl WireFormat for CleanTuple {
    fn to_wire(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.route_id, self.route_number, self.vehicle_id, self.lat, self.lon, self.ts
        )
    }
}

impl WireFormat for ContextTuple {
    fn to_wire(&self) -> String {
        let mut line = self.tuple.to_wire();
        line.push_str(",label=");
        line.push_str(self.label.as_str());
        if let Some(d) = self.dist_prev_m {
            line.push_str(",dist=");
            line.push_str(&d.to_string());
        }
        line
    }
}

pub fn serialize_tuple<T: WireFormat + ?Sized>(t: &T) -> String {
    t.to_wire()
}

fn parse_num<T: std::str::FromStr>(column: &'static str, s: &str) -> Result<Option<T>, ParseError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<T>().map(Some).map_err(|_| ParseError::NotNumeric {
        column,
        value: s.to_string(),
    })
}

/// Parses one feed line. Empty core columns become empty strings or `None`;
/// `arrival_seq` is left at zero for the ingesting node to assign.
pub fn parse_tuple(line: &str) -> Result<RawTuple, ParseError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() < CORE_COLUMNS.len() {
        return Err(ParseError::Arity {
            expected: CORE_COLUMNS.len(),
            found: cols.len(),
        });
    }
    let lat = parse_num::<f64>("lat", cols[3])?;
    let lon = parse_num::<f64>("lon", cols[4])?;
    let ts = parse_num::<i64>("ts", cols[5])?;
    let extras = cols[6..]
        .iter()
        .map(|c| match c.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => (c.to_string(), String::new()),
        })
        .collect();
    Ok(RawTuple {
        route_id: cols[0].to_string(),
        route_number: cols[1].to_string(),
        vehicle_id: cols[2].to_string(),
        lat,
        lon,
        ts,
        extras,
        arrival_seq: 0,
    })
}

/// Best-effort parse used for audit records of lines that `parse_tuple` refused.
/// Unreadable numeric columns become `None`; missing columns become empty.
pub(crate) fn parse_tuple_lossy(line: &str) -> RawTuple {
    let mut cols = line.split(',');
    let mut next = || cols.next().unwrap_or("").to_string();
    let route_id = next();
    let route_number = next();
    let vehicle_id = next();
    let lat = next().parse().ok();
    let lon = next().parse().ok();
    let ts = next().parse().ok();
    RawTuple {
        route_id,
        route_number,
        vehicle_id,
        lat,
        lon,
        ts,
        extras: Vec::new(),
        arrival_seq: 0,
    }
}

/// True for lines that carry no record (blank or `#` comments).
pub fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

impl RawTuple {
    /// Lifts a tuple that is known to be complete. Extras are dropped.
    pub fn to_clean(&self) -> Option<CleanTuple> {
        Some(CleanTuple {
            route_id: self.route_id.clone(),
            route_number: self.route_number.clone(),
            vehicle_id: self.vehicle_id.clone(),
            lat: self.lat?,
            lon: self.lon?,
            ts: self.ts?,
            arrival_seq: self.arrival_seq,
        })
    }
}

impl CleanTuple {
    pub fn to_raw(&self) -> RawTuple {
        RawTuple {
            route_id: self.route_id.clone(),
            route_number: self.route_number.clone(),
            vehicle_id: self.vehicle_id.clone(),
            lat: Some(self.lat),
            lon: Some(self.lon),
            ts: Some(self.ts),
            extras: Vec::new(),
            arrival_seq: self.arrival_seq,
        }
    }
}

impl ContextTuple {
    /// Rebuilds a contextualized tuple from a parsed line carrying `label`/`dist` extras.
    pub fn from_raw(raw: &RawTuple) -> Result<ContextTuple, ParseError> {
        let mut label = None;
        let mut dist = None;
        for (k, v) in &raw.extras {
            match k.as_str() {
                LABEL_KEY => label = Some(v.parse::<MotionLabel>()?),
                DIST_KEY => dist = parse_num::<f64>("dist", v)?,
                _ => {}
            }
        }
        let label = label.ok_or_else(|| ParseError::BadLabel(String::new()))?;
        let tuple = raw.to_clean().ok_or(ParseError::Arity {
            expected: CORE_COLUMNS.len(),
            found: 0,
        })?;
        Ok(ContextTuple {
            tuple,
            label,
            dist_prev_m: dist,
        })
    }
}

pub fn parse_context(line: &str) -> Result<ContextTuple, ParseError> {
    ContextTuple::from_raw(&parse_tuple(line)?)
}

/// Reads every record line of a feed, skipping comments and blanks.
pub fn read_records<R: BufRead>(reader: R) -> std::io::Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !is_skippable(&line) {
            out.push(line);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_core_fields() {
        let t = parse_tuple("r12,12,bus7,46.09,-64.79,1465387200000").unwrap();
        assert_eq!(t.route_id, "r12");
        assert_eq!(t.route_number, "12");
        assert_eq!(t.vehicle_id, "bus7");
        assert_eq!(t.lat, Some(46.09));
        assert_eq!(t.lon, Some(-64.79));
        assert_eq!(t.ts, Some(1465387200000));
        assert!(t.extras.is_empty());
    }

    #[test]
    fn extras_pass_through_in_order() {
        let t = parse_tuple("r12,12,bus7,46.09,-64.79,1465387200000,door=open,seats=3").unwrap();
        assert_eq!(
            t.extras,
            vec![("door".into(), "open".into()), ("seats".into(), "3".into())]
        );
    }

    #[test]
    fn non_numeric_lat_names_column() {
        let err = parse_tuple("r12,12,bus7,abc,-64.79,1465387200000").unwrap_err();
        assert_eq!(
            err,
            ParseError::NotNumeric {
                column: "lat",
                value: "abc".into()
            }
        );
        assert!(err.to_string().contains("lat"));
    }

    #[test]
    fn short_line_is_arity_error() {
        assert!(matches!(
            parse_tuple("r12,12,bus7"),
            Err(ParseError::Arity { found: 3, .. })
        ));
    }

    #[test]
    fn empty_columns_are_absent_not_errors() {
        let t = parse_tuple("r1,,,,,").unwrap();
        assert_eq!(t.vehicle_id, "");
        assert_eq!(t.lat, None);
        assert_eq!(t.ts, None);
    }

    #[test]
    fn context_tuple_format() {
        let c = ContextTuple {
            tuple: CleanTuple {
                route_id: "r1".into(),
                route_number: "1".into(),
                vehicle_id: "v".into(),
                lat: 46.1,
                lon: -64.8,
                ts: 5000,
                arrival_seq: 0,
            },
            label: MotionLabel::Stop,
            dist_prev_m: Some(7.2),
        };
        let line = serialize_tuple(&c);
        assert!(line.ends_with(",label=stop,dist=7.2"), "{line}");
        assert_eq!(parse_context(&line).unwrap(), c);
    }

    #[test]
    fn empty_extras_no_trailing_comma() {
        let t = parse_tuple("r1,1,v,1,2,3").unwrap();
        assert_eq!(serialize_tuple(&t), "r1,1,v,1,2,3");
    }

    #[test]
    fn comments_are_skipped() {
        let input = "# header\nr1,1,v,1,2,3\n\nr1,1,v,1,2,8\n";
        let lines = read_records(input.as_bytes()).unwrap();
        assert_eq!(lines.len(), 2);
    }

    fn token() -> impl Strategy<Value = String> {
        "[A-Za-z0-9_.:-]{0,8}"
    }

    fn raw_tuple() -> impl Strategy<Value = RawTuple> {
        (
            "[A-Za-z0-9_][A-Za-z0-9_.:-]{0,7}",
            token(),
            token(),
            proptest::option::of(-1.0e3f64..1.0e3),
            proptest::option::of(any::<f64>().prop_filter("finite", |v| v.is_finite())),
            proptest::option::of(any::<i64>()),
            proptest::collection::vec(("[a-z][a-z0-9_]{0,6}", "[A-Za-z0-9_.=:-]{0,6}"), 0..4),
        )
            .prop_map(|(route_id, route_number, vehicle_id, lat, lon, ts, extras)| RawTuple {
                route_id,
                route_number,
                vehicle_id,
                lat,
                lon,
                ts,
                extras,
                arrival_seq: 0,
            })
    }

    proptest! {
        #[test]
        fn raw_round_trip(t in raw_tuple()) {
            let line = serialize_tuple(&t);
            prop_assert_eq!(parse_tuple(&line).unwrap(), t);
        }

        #[test]
        fn context_round_trip(
            lat in -90.0f64..90.0, lon in -180.0f64..180.0, ts in any::<i64>(),
            d in proptest::option::of(0.0f64..1.0e6),
        ) {
            let label = match d { Some(d) if d < 15.0 => MotionLabel::Stop, _ => MotionLabel::Move };
            let c = ContextTuple {
                tuple: CleanTuple { route_id: "r".into(), route_number: "1".into(), vehicle_id: "v".into(), lat, lon, ts, arrival_seq: 0 },
                label,
                dist_prev_m: d,
            };
            prop_assert_eq!(parse_context(&serialize_tuple(&c)).unwrap(), c);
        }
    }
}

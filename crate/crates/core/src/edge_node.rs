//! Sensing-layer cleaning: the per-vehicle fog node.
//!
//! Each line goes through parse, missing-attribute check, wrong-value check,
//! redundant-attribute stripping and key-based deduplication, in that order.
//! Gaps in each vehicle's cadence are reported once the stream ends; missing
//! tuples are never imputed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use crate::feed_model::{
    is_skippable, parse_tuple, parse_tuple_lossy, CleanTuple, ParseError, RawTuple, RejectReason, RejectRecord, Stage,
    CORE_COLUMNS,
};
use crate::feedgen::{ConfigError, SessionWindow};

#[derive(Debug, Clone, PartialEq)]
pub struct CleaningConfig {
    pub expected_cadence_s: f64,
    /// A gap wider than `gap_factor * expected_cadence_s` is reported.
    pub gap_factor: f64,
    pub session_window: SessionWindow,
    /// Known route ids and their registered route numbers.
    pub known_routes: BTreeMap<String, String>,
    /// Attribute names kept on a tuple; extras outside it are stripped.
    pub core_schema: Vec<String>,
}

impl CleaningConfig {
    pub fn new(session_window: SessionWindow, known_routes: BTreeMap<String, String>) -> Self {
        CleaningConfig {
            expected_cadence_s: 5.0,
            gap_factor: 1.5,
            session_window,
            known_routes,
            core_schema: CORE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gap_factor > 1.0) {
            return Err(ConfigError::new("gap_factor must be greater than 1"));
        }
        if !(self.expected_cadence_s > 0.0) {
            return Err(ConfigError::new("expected cadence must be positive"));
        }
        if self.session_window.start_ms >= self.session_window.end_ms {
            return Err(ConfigError::new("session window start must precede its end"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapEntry {
    pub vehicle_id: String,
    pub gap_start_ts: i64,
    pub gap_end_ts: i64,
    pub estimated_missing: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CleaningReport {
    pub input_count: u64,
    pub output_count: u64,
    pub duplicates_removed: u64,
    pub missing_attribute_rejects: u64,
    pub wrong_value_rejects: u64,
    pub redundant_attributes_stripped: u64,
    pub gaps: Vec<GapEntry>,
}

impl CleaningReport {
    pub fn missing_gaps_detected(&self) -> u64 {
        self.gaps.len() as u64
    }

    pub fn estimated_missing_total(&self) -> u64 {
        self.gaps.iter().map(|g| g.estimated_missing).sum()
    }

    pub fn rejected(&self) -> u64 {
        self.duplicates_removed + self.missing_attribute_rejects + self.wrong_value_rejects
    }

    pub fn is_balanced(&self) -> bool {
        self.input_count == self.output_count + self.rejected()
    }

    /// Flat `key=value` block; one `gap=` line per detected gap.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "input_count={}", self.input_count);
        let _ = writeln!(out, "output_count={}", self.output_count);
        let _ = writeln!(out, "duplicates_removed={}", self.duplicates_removed);
        let _ = writeln!(out, "missing_attribute_rejects={}", self.missing_attribute_rejects);
        let _ = writeln!(out, "wrong_value_rejects={}", self.wrong_value_rejects);
        let _ = writeln!(out, "redundant_attributes_stripped={}", self.redundant_attributes_stripped);
        let _ = writeln!(out, "missing_gaps_detected={}", self.missing_gaps_detected());
        let _ = writeln!(out, "estimated_missing_total={}", self.estimated_missing_total());
        for g in &self.gaps {
            let _ = writeln!(
                out,
                "gap={},{},{},{}",
                g.vehicle_id, g.gap_start_ts, g.gap_end_ts, g.estimated_missing
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<CleaningReport, ConfigError> {
        let mut r = CleaningReport::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(format!("report line without '=': {line}")))?;
            let num = || {
                v.parse::<u64>()
                    .map_err(|_| ConfigError::new(format!("report key {k} is not a count")))
            };
            match k {
                "input_count" => r.input_count = num()?,
                "output_count" => r.output_count = num()?,
                "duplicates_removed" => r.duplicates_removed = num()?,
                "missing_attribute_rejects" => r.missing_attribute_rejects = num()?,
                "wrong_value_rejects" => r.wrong_value_rejects = num()?,
                "redundant_attributes_stripped" => r.redundant_attributes_stripped = num()?,
                "gap" => {
                    let p: Vec<&str> = v.rsplitn(4, ',').collect();
                    let bad = || ConfigError::new(format!("malformed gap entry: {v}"));
                    if p.len() != 4 {
                        return Err(bad());
                    }
                    r.gaps.push(GapEntry {
                        vehicle_id: p[3].to_string(),
                        gap_start_ts: p[2].parse().map_err(|_| bad())?,
                        gap_end_ts: p[1].parse().map_err(|_| bad())?,
                        estimated_missing: p[0].parse().map_err(|_| bad())?,
                    });
                }
                // derived counters
                "missing_gaps_detected" | "estimated_missing_total" => {}
                _ => return Err(ConfigError::new(format!("unknown report key {k}"))),
            }
        }
        Ok(r)
    }
}

fn reject(raw: &RawTuple, reason: RejectReason) -> RejectRecord {
    RejectRecord {
        raw: raw.clone(),
        reason,
        stage: Stage::Edge,
    }
}

/// Step (3). Rejects a tuple with an empty core field; a missing route number
/// is filled from the route registry when the route is known.
pub fn check_missing_attributes(t: &mut RawTuple, cfg: &CleaningConfig) -> Result<(), RejectRecord> {
    if t.route_id.is_empty() || t.vehicle_id.is_empty() || t.lat.is_none() || t.lon.is_none() || t.ts.is_none() {
        return Err(reject(t, RejectReason::MissingAttribute));
    }
    if t.route_number.is_empty() {
        match cfg.known_routes.get(&t.route_id) {
            Some(n) => t.route_number = n.clone(),
            None => return Err(reject(t, RejectReason::MissingAttribute)),
        }
    }
    Ok(())
}

/// Step (5). Coordinates in range, timestamp inside the session, route known.
pub fn check_wrong_values(t: &RawTuple, cfg: &CleaningConfig) -> Result<(), RejectRecord> {
    let w = cfg.session_window;
    let ok = t.lat.is_some_and(|v| (-90.0..=90.0).contains(&v))
        && t.lon.is_some_and(|v| (-180.0..=180.0).contains(&v))
        && t.ts.is_some_and(|v| (w.start_ms..=w.end_ms).contains(&v))
        && cfg.known_routes.contains_key(&t.route_id);
    if ok {
        Ok(())
    } else {
        Err(reject(t, RejectReason::WrongValue))
    }
}

/// Step (4). Returns how many extras were removed.
pub fn strip_redundant(t: &mut RawTuple, cfg: &CleaningConfig) -> u64 {
    let before = t.extras.len();
    t.extras.retain(|(k, _)| cfg.core_schema.iter().any(|c| c == k));
    (before - t.extras.len()) as u64
}

/// Step (2), batch form: keeps the first tuple by `arrival_seq` for every
/// `(vehicle_id, ts)` key.
pub fn dedupe(stream: Vec<CleanTuple>) -> (Vec<CleanTuple>, Vec<RejectRecord>) {
    let mut order: Vec<usize> = (0..stream.len()).collect();
    order.sort_by_key(|&i| stream[i].arrival_seq);
    let mut first: HashSet<(&str, i64)> = HashSet::new();
    let mut keep = vec![false; stream.len()];
    for i in order {
        keep[i] = first.insert((stream[i].vehicle_id.as_str(), stream[i].ts));
    }
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (t, k) in stream.iter().zip(keep) {
        if k {
            kept.push(t.clone());
        } else {
            removed.push(reject(&t.to_raw(), RejectReason::Duplicate));
        }
    }
    (kept, removed)
}

/// Step (1) for one vehicle; `ts` must be sorted ascending.
pub fn detect_missing(vehicle_id: &str, ts: &[i64], cfg: &CleaningConfig) -> Vec<GapEntry> {
    let cadence_ms = cfg.expected_cadence_s * 1000.0;
    let threshold = cfg.gap_factor * cadence_ms;
    ts.windows(2)
        .filter_map(|w| {
            let delta = (w[1] - w[0]) as f64;
            (delta > threshold).then(|| GapEntry {
                vehicle_id: vehicle_id.to_string(),
                gap_start_ts: w[0],
                gap_end_ts: w[1],
                estimated_missing: ((delta / cadence_ms).round() as u64).saturating_sub(1),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Clean(CleanTuple),
    Rejected(RejectRecord),
}

/// Streaming cleaner for one edge node. Tuples are emitted in arrival order;
/// gap detection runs in [`EdgeNode::finish`].
#[derive(Debug)]
pub struct EdgeNode {
    id: usize,
    cfg: CleaningConfig,
    next_seq: u64,
    seen: HashSet<(String, i64)>,
    timestamps: HashMap<String, Vec<i64>>,
    report: CleaningReport,
}

impl EdgeNode {
    pub fn new(id: usize, cfg: CleaningConfig) -> Self {
        EdgeNode {
            id,
            cfg,
            next_seq: 0,
            seen: HashSet::new(),
            timestamps: HashMap::new(),
            report: CleaningReport::default(),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Returns `None` for comment and blank lines, which are not tuples.
    pub fn ingest_line(&mut self, line: &str) -> Option<Outcome> {
        if is_skippable(line) {
            return None;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.report.input_count += 1;
        let outcome = match parse_tuple(line) {
            Ok(mut raw) => {
                raw.arrival_seq = seq;
                self.process(raw)
            }
            Err(e) => {
                let mut raw = parse_tuple_lossy(line);
                raw.arrival_seq = seq;
                let reason = match e {
                    ParseError::Arity { .. } => RejectReason::MissingAttribute,
                    _ => RejectReason::WrongValue,
                };
                Outcome::Rejected(reject(&raw, reason))
            }
        };
        match &outcome {
            Outcome::Clean(_) => self.report.output_count += 1,
            Outcome::Rejected(r) => match r.reason {
                RejectReason::Duplicate => self.report.duplicates_removed += 1,
                RejectReason::MissingAttribute => self.report.missing_attribute_rejects += 1,
                RejectReason::WrongValue => self.report.wrong_value_rejects += 1,
                RejectReason::LateDrop => unreachable!("edge nodes never drop late tuples"),
            },
        }
        Some(outcome)
    }

    fn process(&mut self, mut raw: RawTuple) -> Outcome {
        if let Err(r) = check_missing_attributes(&mut raw, &self.cfg) {
            return Outcome::Rejected(r);
        }
        if let Err(r) = check_wrong_values(&raw, &self.cfg) {
            return Outcome::Rejected(r);
        }
        self.report.redundant_attributes_stripped += strip_redundant(&mut raw, &self.cfg);
        let clean = raw.to_clean().expect("checked complete");
        if !self.seen.insert((clean.vehicle_id.clone(), clean.ts)) {
            return Outcome::Rejected(reject(&raw, RejectReason::Duplicate));
        }
        self.timestamps.entry(clean.vehicle_id.clone()).or_default().push(clean.ts);
        Outcome::Clean(clean)
    }

    pub fn finish(mut self) -> CleaningReport {
        let mut vehicles: Vec<_> = self.timestamps.into_iter().collect();
        vehicles.sort_by(|a, b| a.0.cmp(&b.0));
        for (vehicle, mut ts) in vehicles {
            ts.sort_unstable();
            self.report.gaps.extend(detect_missing(&vehicle, &ts, &self.cfg));
        }
        self.report
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanOutput {
    pub clean: Vec<CleanTuple>,
    pub report: CleaningReport,
    pub rejects: Vec<RejectRecord>,
}

/// Runs every cleaning step over a whole feed.
pub fn clean_stream<R: BufRead>(reader: R, cfg: &CleaningConfig) -> std::io::Result<CleanOutput> {
    let mut node = EdgeNode::new(0, cfg.clone());
    let mut clean = Vec::new();
    let mut rejects = Vec::new();
    for line in reader.lines() {
        match node.ingest_line(&line?) {
            Some(Outcome::Clean(t)) => clean.push(t),
            Some(Outcome::Rejected(r)) => rejects.push(r),
            None => {}
        }
    }
    Ok(CleanOutput {
        clean,
        report: node.finish(),
        rejects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feed_model::WireFormat;

    const T0: i64 = 1_465_387_200_000;

    fn cfg() -> CleaningConfig {
        let routes = [("r12".to_string(), "12".to_string())].into_iter().collect();
        CleaningConfig::new(
            SessionWindow {
                start_ms: T0,
                end_ms: T0 + 3_600_000,
            },
            routes,
        )
    }

    fn raw(line: &str) -> RawTuple {
        parse_tuple(line).unwrap()
    }

    fn run(input: &str) -> CleanOutput {
        clean_stream(input.as_bytes(), &cfg()).unwrap()
    }

    #[test]
    fn gap_of_three_missing_ticks() {
        let gaps = detect_missing("bus7", &[0, 20_000], &cfg());
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].estimated_missing, 3);
    }

    #[test]
    fn exact_cadence_no_gap() {
        assert!(detect_missing("bus7", &[0, 5_000], &cfg()).is_empty());
    }

    #[test]
    fn jitter_below_factor_no_gap() {
        assert!(detect_missing("bus7", &[0, 7_000], &cfg()).is_empty());
        assert_eq!(detect_missing("bus7", &[0, 8_000], &cfg())[0].estimated_missing, 1);
    }

    #[test]
    fn identical_lines_first_kept() {
        let line = format!("r12,12,bus7,46.09,-64.79,{T0}");
        let out = run(&format!("{line}\n{line}\n"));
        assert_eq!(out.clean.len(), 1);
        assert_eq!(out.clean[0].arrival_seq, 0);
        assert_eq!(out.rejects.len(), 1);
        assert_eq!(out.rejects[0].reason, RejectReason::Duplicate);
        assert_eq!(out.rejects[0].raw.arrival_seq, 1);
    }

    #[test]
    fn duplicate_key_with_different_extras() {
        let a = CleanTuple {
            arrival_seq: 4,
            ..raw(&format!("r12,12,bus7,46.09,-64.79,{T0}")).to_clean().unwrap()
        };
        let b = CleanTuple {
            arrival_seq: 2,
            lat: 46.1,
            ..a.clone()
        };
        let (kept, removed) = dedupe(vec![a.clone(), b.clone()]);
        assert_eq!(kept, vec![b]);
        assert_eq!(removed.len(), 1);
        assert_eq!(removed[0].raw.arrival_seq, 4);
    }

    #[test]
    fn missing_attribute_cases() {
        let mut t = raw(&format!("r12,12,,46.09,-64.79,{T0}"));
        assert_eq!(
            check_missing_attributes(&mut t, &cfg()).unwrap_err().reason,
            RejectReason::MissingAttribute
        );

        let mut t = raw(&format!("r12,,bus7,46.09,-64.79,{T0}"));
        check_missing_attributes(&mut t, &cfg()).unwrap();
        assert_eq!(t.route_number, "12");

        let mut t = raw(&format!("r99,,bus7,46.09,-64.79,{T0}"));
        assert!(check_missing_attributes(&mut t, &cfg()).is_err());

        let mut t = raw(&format!("r12,12,bus7,46.09,-64.79,{T0}"));
        let before = t.clone();
        check_missing_attributes(&mut t, &cfg()).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn strip_counts() {
        let c = cfg();
        let mut t = raw(&format!("r12,12,bus7,46.09,-64.79,{T0},door=open"));
        assert_eq!(strip_redundant(&mut t, &c), 1);
        assert!(t.extras.is_empty());
        assert_eq!(strip_redundant(&mut t, &c), 0);
        let mut t = raw(&format!("r12,12,bus7,46.09,-64.79,{T0},a=1,b=2,c=3"));
        assert_eq!(strip_redundant(&mut t, &c), 3);
    }

    #[test]
    fn whitelisted_extra_survives_strip() {
        let mut c = cfg();
        c.core_schema.push("door".into());
        let mut t = raw(&format!("r12,12,bus7,46.09,-64.79,{T0},door=open,seats=3"));
        assert_eq!(strip_redundant(&mut t, &c), 1);
        assert_eq!(t.extras, vec![("door".to_string(), "open".to_string())]);
    }

    #[test]
    fn wrong_value_cases() {
        let c = cfg();
        assert!(check_wrong_values(&raw(&format!("r12,12,bus7,91,-64.79,{T0}")), &c).is_err());
        assert!(check_wrong_values(&raw(&format!("r12,12,bus7,46,-181,{T0}")), &c).is_err());
        assert!(check_wrong_values(&raw(&format!("r12,12,bus7,46,-64,{}", T0 - 1)), &c).is_err());
        assert!(check_wrong_values(&raw(&format!("r13,12,bus7,46,-64,{T0}")), &c).is_err());
        assert!(check_wrong_values(&raw(&format!("r12,12,bus7,46,-64,{T0}")), &c).is_ok());
    }

    #[test]
    fn empty_input() {
        let out = run("");
        assert!(out.clean.is_empty() && out.rejects.is_empty());
        assert_eq!(out.report, CleaningReport::default());
    }

    #[test]
    fn bad_lines_do_not_abort() {
        let input = format!("r12,12,bus7,abc,-64.79,{T0}\nr12,12\nr12,12,bus7,46.09,-64.79,{T0}\n");
        let out = run(&input);
        assert_eq!(out.clean.len(), 1);
        assert_eq!(out.report.wrong_value_rejects, 1);
        assert_eq!(out.report.missing_attribute_rejects, 1);
        assert!(out.report.is_balanced());
    }

    #[test]
    fn corrupt_duplicate_counts_as_corrupt() {
        let good = format!("r12,12,bus7,46.09,-64.79,{T0}");
        let bad = format!("r12,12,bus7,95,-64.79,{T0}");
        let out = run(&format!("{bad}\n{good}\n"));
        assert_eq!(out.report.wrong_value_rejects, 1);
        assert_eq!(out.report.duplicates_removed, 0);
        assert_eq!(out.clean.len(), 1);
    }

    #[test]
    fn idempotent_on_own_output() {
        let input = format!(
            "r12,12,bus7,46.09,-64.79,{T0},x=1\nr12,12,bus7,46.09,-64.79,{T0}\nr12,,bus8,46.1,-64.7,{}\n",
            T0 + 20_000
        );
        let first = run(&input);
        let text: String = first.clean.iter().map(|t| t.to_wire() + "\n").collect();
        let second = run(&text);
        assert_eq!(second.report.rejected(), 0);
        assert_eq!(second.report.redundant_attributes_stripped, 0);
        let strip_seq = |v: &[CleanTuple]| v.iter().map(|t| t.to_wire()).collect::<Vec<_>>();
        assert_eq!(strip_seq(&second.clean), strip_seq(&first.clean));
    }

    #[test]
    fn report_text_round_trip() {
        let input = format!(
            "r12,12,bus7,46.09,-64.79,{T0}\nr12,12,bus7,46.09,-64.79,{}\n",
            T0 + 30_000
        );
        let out = run(&input);
        assert_eq!(out.report.gaps.len(), 1);
        assert_eq!(CleaningReport::from_text(&out.report.to_text()).unwrap(), out.report);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.gap_factor = 1.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.session_window.end_ms = c.session_window.start_ms;
        assert!(c.validate().is_err());
        assert!(cfg().validate().is_ok());
    }
}

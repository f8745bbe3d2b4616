//! Flat `key = value` configuration for an end-to-end run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::fabric::{DEFAULT_LATENESS_BOUND_S, DEFAULT_STOP_THRESHOLD_M};
use crate::feedgen::ConfigError;
use crate::graph_cloud::{PageRankParams, DEFAULT_STATION_RADIUS_M};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "MOBILITY_CONFIG";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub feed: PathBuf,
    pub network: PathBuf,
    pub snapshot_dir: PathBuf,
    pub report_dir: PathBuf,
    pub expected_cadence_s: f64,
    pub gap_factor: f64,
    /// Overrides the network file's `#session` window when both are set.
    pub session_start_ms: Option<i64>,
    pub session_end_ms: Option<i64>,
    pub lateness_bound_s: f64,
    pub stop_threshold_m: f64,
    pub station_radius_m: f64,
    pub pagerank: PageRankParams,
    pub edge_nodes: usize,
    /// Capacity, in chunks, of every inter-stage queue.
    pub queue_capacity: usize,
    /// Lines per chunk handed to an edge node.
    pub chunk_lines: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            feed: PathBuf::from("feed.txt"),
            network: PathBuf::from("network.txt"),
            snapshot_dir: PathBuf::from("out/snapshots"),
            report_dir: PathBuf::from("out/reports"),
            expected_cadence_s: 5.0,
            gap_factor: 1.5,
            session_start_ms: None,
            session_end_ms: None,
            lateness_bound_s: DEFAULT_LATENESS_BOUND_S,
            stop_threshold_m: DEFAULT_STOP_THRESHOLD_M,
            station_radius_m: DEFAULT_STATION_RADIUS_M,
            pagerank: PageRankParams::default(),
            edge_nodes: 4,
            queue_capacity: 16,
            chunk_lines: 512,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError::new(format!("{key}: cannot parse {v:?}")))
}

fn opt_text<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

impl PipelineConfig {
    /// Every key, in a fixed order. Floats print in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("feed", self.feed.display().to_string());
        kv("network", self.network.display().to_string());
        kv("snapshot_dir", self.snapshot_dir.display().to_string());
        kv("report_dir", self.report_dir.display().to_string());
        kv("expected_cadence_s", self.expected_cadence_s.to_string());
        kv("gap_factor", self.gap_factor.to_string());
        kv("session_start_ms", opt_text(&self.session_start_ms));
        kv("session_end_ms", opt_text(&self.session_end_ms));
        kv("lateness_bound_s", self.lateness_bound_s.to_string());
        kv("stop_threshold_m", self.stop_threshold_m.to_string());
        kv("station_radius_m", self.station_radius_m.to_string());
        kv("pagerank_damping", self.pagerank.damping.to_string());
        kv("pagerank_tol", self.pagerank.tol.to_string());
        kv("pagerank_max_iter", self.pagerank.max_iter.to_string());
        kv("edge_nodes", self.edge_nodes.to_string());
        kv("queue_capacity", self.queue_capacity.to_string());
        kv("chunk_lines", self.chunk_lines.to_string());
        out
    }

    /// Missing keys keep their defaults. Blank lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<PipelineConfig, ConfigError> {
        let mut c = PipelineConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let opt = |v: &str| -> Result<Option<i64>, ConfigError> {
                if v.is_empty() {
                    Ok(None)
                } else {
                    parse_num(k, v).map(Some)
                }
            };
            match k {
                "feed" => c.feed = PathBuf::from(v),
                "network" => c.network = PathBuf::from(v),
                "snapshot_dir" => c.snapshot_dir = PathBuf::from(v),
                "report_dir" => c.report_dir = PathBuf::from(v),
                "expected_cadence_s" => c.expected_cadence_s = parse_num(k, v)?,
                "gap_factor" => c.gap_factor = parse_num(k, v)?,
                "session_start_ms" => c.session_start_ms = opt(v)?,
                "session_end_ms" => c.session_end_ms = opt(v)?,
                "lateness_bound_s" => c.lateness_bound_s = parse_num(k, v)?,
                "stop_threshold_m" => c.stop_threshold_m = parse_num(k, v)?,
                "station_radius_m" => c.station_radius_m = parse_num(k, v)?,
                "pagerank_damping" => c.pagerank.damping = parse_num(k, v)?,
                "pagerank_tol" => c.pagerank.tol = parse_num(k, v)?,
                "pagerank_max_iter" => c.pagerank.max_iter = parse_num(k, v)?,
                "edge_nodes" => c.edge_nodes = parse_num(k, v)?,
                "queue_capacity" => c.queue_capacity = parse_num(k, v)?,
                "chunk_lines" => c.chunk_lines = parse_num(k, v)?,
                _ => return Err(ConfigError::new(format!("line {}: unknown key {k:?}", n + 1))),
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Thresholds positive, counts non-zero, input files present.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("expected_cadence_s", self.expected_cadence_s),
            ("lateness_bound_s", self.lateness_bound_s),
            ("stop_threshold_m", self.stop_threshold_m),
            ("station_radius_m", self.station_radius_m),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(format!("{k} must be positive, got {v}")));
            }
        }
        if !(self.gap_factor > 1.0) {
            return Err(ConfigError::new("gap_factor must be greater than 1"));
        }
        self.pagerank
            .validate()
            .map_err(|e| ConfigError::new(e.to_string()))?;
        for (k, v) in [
            ("edge_nodes", self.edge_nodes),
            ("queue_capacity", self.queue_capacity),
            ("chunk_lines", self.chunk_lines),
        ] {
            if v == 0 {
                return Err(ConfigError::new(format!("{k} must be at least 1")));
            }
        }
        if self.session_start_ms.is_some() != self.session_end_ms.is_some() {
            return Err(ConfigError::new("session_start_ms and session_end_ms must be set together"));
        }
        for (k, p) in [("feed", &self.feed), ("network", &self.network)] {
            if !p.is_file() {
                return Err(ConfigError::new(format!("{k} file {} not found", p.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_partial_files() {
        let c = PipelineConfig::from_text("# run\n\nedge_nodes = 2\nfeed=/tmp/f.txt\n").unwrap();
        assert_eq!(c.edge_nodes, 2);
        assert_eq!(c.feed, PathBuf::from("/tmp/f.txt"));
        assert_eq!(c.gap_factor, 1.5);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(PipelineConfig::from_text("colour = blue").is_err());
        assert!(PipelineConfig::from_text("edge_nodes = many").is_err());
    }

    #[test]
    fn validate_checks_files_and_thresholds() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = PipelineConfig {
            feed: dir.path().join("feed.txt"),
            network: dir.path().join("network.txt"),
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
        std::fs::write(&c.feed, "").unwrap();
        std::fs::write(&c.network, "").unwrap();
        c.validate().unwrap();
        c.stop_threshold_m = 0.0;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn populated_config_round_trips(
            cadence in 0.001f64..1e4,
            gap in 1.0001f64..10.0,
            session in proptest::option::of((0i64..2_000_000_000_000, 1i64..1_000_000_000)),
            lateness in 0.001f64..600.0,
            stop in 0.1f64..100.0,
            radius in 0.1f64..500.0,
            damping in 0.01f64..0.99,
            tol in 1e-15f64..1e-2,
            iters in 1usize..10_000,
            nodes in 1usize..64,
            cap in 1usize..1024,
            chunk in 1usize..100_000,
            name in "[a-z0-9_/.-]{1,20}",
        ) {
            let c = PipelineConfig {
                feed: PathBuf::from(format!("{name}/feed.txt")),
                network: PathBuf::from(format!("{name}/network.txt")),
                snapshot_dir: PathBuf::from(format!("{name}/snap")),
                report_dir: PathBuf::from(format!("{name}/rep")),
                expected_cadence_s: cadence,
                gap_factor: gap,
                session_start_ms: session.map(|s| s.0),
                session_end_ms: session.map(|s| s.0 + s.1),
                lateness_bound_s: lateness,
                stop_threshold_m: stop,
                station_radius_m: radius,
                pagerank: PageRankParams { damping, tol, max_iter: iters },
                edge_nodes: nodes,
                queue_capacity: cap,
                chunk_lines: chunk,
            };
            prop_assert_eq!(PipelineConfig::from_text(&c.to_text()).unwrap(), c);
        }
    }
}

//! Edge nodes ∥ → fabric → graph cloud, wired with bounded queues.
//!
//! The feed is sharded by vehicle id. Each edge node sends one message per
//! input chunk and the fabric takes them round-robin, so a run is
//! deterministic regardless of thread scheduling.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::Arc;
use std::thread;

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::edge_node::{CleaningConfig, CleaningReport, EdgeNode, Outcome};
use crate::fabric::{
    encode_frame, Batch, ControlKind, ControlMessage, Destination, DownstreamRouter, Fabric, FabricConfig,
    FabricMetrics,
};
use crate::feed_model::{is_skippable, CleanTuple, RejectRecord};
use crate::feedgen::{parse_network, ConfigError, Network};
use crate::graph_cloud::{GraphError, GraphStore, QueryResult};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage}: {path}: {source}")]
    Io {
        stage: &'static str,
        path: PathBuf,
        source: io::Error,
    },
    #[error("cloud: {0}")]
    Graph(#[from] GraphError),
    #[error("{0}: stage stopped unexpectedly")]
    Stage(String),
}

fn io_err(stage: &'static str, path: &Path) -> impl FnOnce(io::Error) -> PipelineError {
    let path = path.to_path_buf();
    move |source| PipelineError::Io { stage, path, source }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Edge node index for a raw feed line, keyed on its vehicle column.
pub fn shard_of(line: &str, edge_nodes: usize) -> usize {
    let vehicle = line.split(',').nth(2).unwrap_or("").trim();
    (fnv1a(vehicle.as_bytes()) % edge_nodes as u64) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeResult {
    pub report: CleaningReport,
    pub rejects: Vec<RejectRecord>,
    pub inbox: Vec<ControlMessage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub edges: Vec<EdgeResult>,
    pub fabric: FabricMetrics,
    pub fabric_rejects: Vec<RejectRecord>,
    pub batches: u64,
    pub snapshots: usize,
    pub pagerank: Option<QueryResult>,
}

impl RunSummary {
    pub fn tuples_in(&self) -> u64 {
        self.edges.iter().map(|e| e.report.input_count).sum()
    }

    pub fn edge_rejected(&self) -> u64 {
        self.edges.iter().map(|e| e.report.rejected()).sum()
    }

    pub fn fabric_rejected(&self) -> u64 {
        self.fabric.late_drops + self.fabric.duplicate_drops
    }

    pub fn rejected(&self) -> u64 {
        self.edge_rejected() + self.fabric_rejected()
    }

    pub fn tuples_out(&self) -> u64 {
        self.fabric.emitted
    }

    /// `in = out + rejected`, with every edge report balanced and the fabric
    /// having received exactly what the edges emitted.
    pub fn is_balanced(&self) -> bool {
        let edge_out: u64 = self.edges.iter().map(|e| e.report.output_count).sum();
        self.edges.iter().all(|e| e.report.is_balanced())
            && self.fabric.received == edge_out
            && self.fabric.received == self.fabric.emitted + self.fabric_rejected()
            && self.tuples_in() == self.tuples_out() + self.rejected()
    }

    pub fn summary_line(&self) -> String {
        format!(
            "in={} out={} rejected={} (edge={} fabric={}) batches={} snapshots={} balanced={}",
            self.tuples_in(),
            self.tuples_out(),
            self.rejected(),
            self.edge_rejected(),
            self.fabric_rejected(),
            self.batches,
            self.snapshots,
            self.is_balanced()
        )
    }
}

enum EdgeMsg {
    Chunk(Vec<CleanTuple>),
    Done,
}

/// Loads the network and builds the edge cleaning config from `cfg`.
pub fn cleaning_setup(cfg: &PipelineConfig) -> Result<(Network, CleaningConfig), PipelineError> {
    let text = fs::read_to_string(&cfg.network).map_err(io_err("network", &cfg.network))?;
    let file = parse_network(&text)?;
    let session = match (cfg.session_start_ms, cfg.session_end_ms, file.session) {
        (Some(start_ms), Some(end_ms), _) => crate::feedgen::SessionWindow { start_ms, end_ms },
        (_, _, Some(s)) => s,
        _ => {
            return Err(ConfigError::new(
                "no session window: set session_start_ms/session_end_ms or add #session to the network file",
            )
            .into())
        }
    };
    let routes = file
        .network
        .routes
        .iter()
        .map(|r| (r.id.clone(), r.number.clone()))
        .collect();
    let mut cleaning = CleaningConfig::new(session, routes);
    cleaning.expected_cadence_s = cfg.expected_cadence_s;
    cleaning.gap_factor = cfg.gap_factor;
    cleaning.validate()?;
    Ok((file.network, cleaning))
}

fn edge_worker(
    id: usize,
    shard: Arc<Vec<String>>,
    cfg: CleaningConfig,
    chunk_lines: usize,
    out: SyncSender<EdgeMsg>,
    inbox: Receiver<ControlMessage>,
) -> EdgeResult {
    let mut node = EdgeNode::new(id, cfg);
    let mut rejects = Vec::new();
    let mut connected = true;
    for chunk in shard.chunks(chunk_lines) {
        let mut clean = Vec::with_capacity(chunk.len());
        for line in chunk {
            match node.ingest_line(line) {
                Some(Outcome::Clean(t)) => clean.push(t),
                Some(Outcome::Rejected(r)) => rejects.push(r),
                None => {}
            }
        }
        if out.send(EdgeMsg::Chunk(clean)).is_err() {
            connected = false;
            break;
        }
    }
    if connected {
        let _ = out.send(EdgeMsg::Done);
    }
    drop(out);
    // Control traffic arrives until the router hangs up.
    let inbox = inbox.iter().collect();
    EdgeResult {
        report: node.finish(),
        rejects,
        inbox,
    }
}

fn fabric_worker(
    inputs: Vec<Receiver<EdgeMsg>>,
    cfg: FabricConfig,
    batches: SyncSender<Batch>,
) -> Result<(FabricMetrics, Vec<RejectRecord>), PipelineError> {
    let mut fabric = Fabric::new(0..inputs.len(), &cfg);
    let mut rejects = Vec::new();
    let mut open: Vec<bool> = vec![true; inputs.len()];
    let hung_up = || PipelineError::Stage("fabric: cloud".into());
    while open.iter().any(|&o| o) {
        for (i, rx) in inputs.iter().enumerate() {
            if !open[i] {
                continue;
            }
            let step = match rx.recv() {
                Ok(EdgeMsg::Chunk(tuples)) => fabric.push_all(i, tuples),
                Ok(EdgeMsg::Done) => {
                    open[i] = false;
                    fabric.close_source(i)
                }
                Err(_) => return Err(PipelineError::Stage(format!("edge node {i}"))),
            };
            rejects.extend(step.rejects);
            for b in step.closed {
                batches.send(b).map_err(|_| hung_up())?;
            }
        }
    }
    Ok((fabric.metrics().clone(), rejects))
}

fn cloud_worker(
    mut store: GraphStore,
    snapshot_dir: PathBuf,
    batches: Receiver<Batch>,
) -> Result<GraphStore, PipelineError> {
    for b in batches {
        store.ingest_batch(&b)?;
        store
            .persist(&snapshot_dir, b.hour, &b)
            .map_err(io_err("cloud", &snapshot_dir))?;
    }
    Ok(store)
}

/// Removes what a previous run left in `dir`: `network.txt` and the
/// numeric year directories.
fn clear_snapshot_dir(dir: &Path) -> io::Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name == "network.txt" {
            fs::remove_file(entry.path())?;
        } else if !name.is_empty() && name.bytes().all(|b| b.is_ascii_digit()) && entry.file_type()?.is_dir() {
            fs::remove_dir_all(entry.path())?;
        }
    }
    Ok(())
}

fn join<T>(h: thread::JoinHandle<T>, stage: &str) -> Result<T, PipelineError> {
    h.join().map_err(|_| PipelineError::Stage(stage.to_string()))
}

/// Runs the whole pipeline, writing snapshots and reports.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let (network, cleaning) = cleaning_setup(cfg)?;
    let feed = fs::read_to_string(&cfg.feed).map_err(io_err("feed", &cfg.feed))?;

    let n = cfg.edge_nodes;
    let mut shards: Vec<Vec<String>> = vec![Vec::new(); n];
    for line in feed.lines().filter(|l| !is_skippable(l)) {
        shards[shard_of(line, n)].push(line.to_string());
    }
    drop(feed);

    clear_snapshot_dir(&cfg.snapshot_dir).map_err(io_err("cloud", &cfg.snapshot_dir))?;
    let store = GraphStore::new(network, cfg.station_radius_m);
    store
        .write_network(&cfg.snapshot_dir)
        .map_err(io_err("cloud", &cfg.snapshot_dir))?;

    let mut router = DownstreamRouter::new(cfg.queue_capacity);
    let mut edge_handles = Vec::with_capacity(n);
    let mut fabric_inputs = Vec::with_capacity(n);
    for (i, shard) in shards.into_iter().enumerate() {
        let (tx, rx) = sync_channel(cfg.queue_capacity);
        fabric_inputs.push(rx);
        let inbox = router.register(i);
        let shard = Arc::new(shard);
        let cleaning = cleaning.clone();
        let chunk = cfg.chunk_lines;
        edge_handles.push(
            thread::Builder::new()
                .name(format!("edge-{i}"))
                .spawn(move || edge_worker(i, shard, cleaning, chunk, tx, inbox))
                .map_err(|e| PipelineError::Stage(format!("edge node {i}: {e}")))?,
        );
    }

    let (batch_tx, batch_rx) = sync_channel(cfg.queue_capacity);
    let fabric_cfg = FabricConfig {
        lateness_bound_s: cfg.lateness_bound_s,
        stop_threshold_m: cfg.stop_threshold_m,
    };
    let fabric = thread::spawn(move || fabric_worker(fabric_inputs, fabric_cfg, batch_tx));
    let snapshot_dir = cfg.snapshot_dir.clone();
    let cloud = thread::spawn(move || cloud_worker(store, snapshot_dir, batch_rx));

    let cloud_result = join(cloud, "cloud")?;
    let fabric_result = join(fabric, "fabric")?;

    let mut pagerank = None;
    let outcome = match (fabric_result, cloud_result) {
        (Ok(f), Ok(store)) => {
            if let (Some(first), Some(last)) = (store.tree().first(), store.tree().last()) {
                let r = store.pagerank(first, last, &cfg.pagerank)?;
                let msg = ControlMessage {
                    kind: ControlKind::QueryResult,
                    payload: r.to_json(),
                    destination: Destination::Broadcast,
                };
                router
                    .send_downstream(msg)
                    .map_err(|e| PipelineError::Stage(format!("fabric: {e}")))?;
                pagerank = Some(r);
            }
            Ok((f, store))
        }
        // A cloud failure makes the fabric fail too; report the cause.
        (_, Err(e)) | (Err(e), _) => Err(e),
    };
    drop(router);
    let mut edges = Vec::with_capacity(n);
    for (i, h) in edge_handles.into_iter().enumerate() {
        edges.push(join(h, &format!("edge node {i}"))?);
    }
    let ((fabric, fabric_rejects), store) = outcome?;

    let summary = RunSummary {
        edges,
        batches: fabric.batches_closed,
        fabric,
        fabric_rejects,
        snapshots: store.len(),
        pagerank,
    };
    write_reports(&cfg.report_dir, &summary)?;
    Ok(summary)
}

fn write_reports(dir: &Path, s: &RunSummary) -> Result<(), PipelineError> {
    let err = io_err("reports", dir);
    fs::create_dir_all(dir).map_err(err)?;
    let write = |name: String, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|source| PipelineError::Io {
            stage: "reports",
            path: p,
            source,
        })
    };
    let lines = |rs: &[RejectRecord]| rs.iter().map(|r| r.to_line() + "\n").collect::<String>();
    for (i, e) in s.edges.iter().enumerate() {
        write(format!("edge-{i}.report.txt"), e.report.to_text())?;
        write(format!("edge-{i}.rejects.txt"), lines(&e.rejects))?;
        let inbox: Vec<u8> = e.inbox.iter().flat_map(encode_frame).collect();
        write(format!("edge-{i}.inbox.txt"), String::from_utf8_lossy(&inbox).into_owned())?;
    }
    write("fabric.txt".into(), s.fabric.to_text())?;
    write("fabric.rejects.txt".into(), lines(&s.fabric_rejects))?;
    let mut summary = String::new();
    let _ = writeln!(summary, "tuples_in={}", s.tuples_in());
    let _ = writeln!(summary, "tuples_out={}", s.tuples_out());
    let _ = writeln!(summary, "edge_rejected={}", s.edge_rejected());
    let _ = writeln!(summary, "fabric_rejected={}", s.fabric_rejected());
    let _ = writeln!(summary, "batches={}", s.batches);
    let _ = writeln!(summary, "snapshots={}", s.snapshots);
    let _ = writeln!(summary, "balanced={}", s.is_balanced());
    write("summary.txt".into(), summary)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedgen::{generate, FaultProfile, NetworkSpec, TripParams};

    fn small_spec() -> NetworkSpec {
        NetworkSpec {
            routes: 3,
            stations: 24,
            hub_routes: 2,
            ..NetworkSpec::default()
        }
    }

    fn setup(dir: &Path, faults: &FaultProfile) -> PipelineConfig {
        let g = generate(&small_spec(), &TripParams::default(), 1195, 5, faults).unwrap();
        g.write_to(&dir.join("gen")).unwrap();
        PipelineConfig {
            feed: dir.join("gen/feed.txt"),
            network: dir.join("gen/network.txt"),
            snapshot_dir: dir.join("out/snapshots"),
            report_dir: dir.join("out/reports"),
            edge_nodes: 3,
            chunk_lines: 50,
            queue_capacity: 2,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn zero_fault_run_rejects_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let faults = FaultProfile {
            duplicate_rate: 0.0,
            drop_rate: 0.0,
            corrupt_rate: 0.0,
            max_lateness_s: 0.0,
            ..FaultProfile::default()
        };
        let cfg = setup(dir.path(), &faults);
        let s = run_pipeline(&cfg).unwrap();
        assert_eq!(s.rejected(), 0);
        assert!(s.is_balanced());
        assert_eq!(s.snapshots, 1);
        assert!(s.edges.iter().all(|e| e.inbox.len() == 1));
        let loaded = GraphStore::load(&cfg.snapshot_dir, cfg.station_radius_m).unwrap();
        assert_eq!(loaded.len(), 1);
    }

    #[test]
    fn faulty_run_balances_and_reruns_identically() {
        let dir = tempfile::tempdir().unwrap();
        let faults = FaultProfile {
            duplicate_rate: 0.05,
            drop_rate: 0.05,
            corrupt_rate: 0.05,
            max_lateness_s: 8.0,
            ..FaultProfile::default()
        };
        let cfg = setup(dir.path(), &faults);
        let first = run_pipeline(&cfg).unwrap();
        assert!(first.is_balanced(), "{}", first.summary_line());
        assert_eq!(first.fabric_rejected(), 0);
        let snap = fs::read(cfg.snapshot_dir.join("2016/06/08/12/batch.txt")).unwrap();
        let second = run_pipeline(&cfg).unwrap();
        assert_eq!(first, second);
        assert_eq!(fs::read(cfg.snapshot_dir.join("2016/06/08/12/batch.txt")).unwrap(), snap);
    }

    #[test]
    fn missing_feed_is_config_error() {
        let cfg = PipelineConfig {
            feed: PathBuf::from("/nonexistent/feed.txt"),
            ..PipelineConfig::default()
        };
        assert!(matches!(run_pipeline(&cfg), Err(PipelineError::Config(_))));
    }
}

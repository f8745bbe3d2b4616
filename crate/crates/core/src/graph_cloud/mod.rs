//! Hourly trajectory graph snapshots indexed by a time tree, with
//! shortest-path, degree and PageRank queries over hour ranges.

mod export;
mod pagerank;
mod query;
mod snapshot;
mod time_tree;

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fabric::{Batch, BatchFileError};
use crate::feedgen::{parse_network, write_network, Network};
use crate::hour::HourBucket;

pub use export::{EdgeRow, ExportFormat, ExportedGraph, NodeRow};
pub use pagerank::{pagerank_on, PageRankParams, PageRankScores};
pub use query::{DegreeEntry, Payload, QueryKind, QueryResult, StationGraph};
pub use snapshot::{AtEdge, NextEdge, ObservationNode, Snapshot};
pub use time_tree::TimeTree;

pub const DEFAULT_STATION_RADIUS_M: f64 = 30.0;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("batch {0} already ingested")]
    DuplicateBatch(u64),
    #[error("hour {0} already has a snapshot")]
    DuplicateHour(HourBucket),
    #[error("batch {0} is not closed")]
    BatchNotClosed(u64),
    #[error("batch {batch_id}: tuple at {ts} lies outside the batch hour or repeats a key")]
    CorruptBatch { batch_id: u64, ts: i64 },
    #[error("bad range: {from} is after {to}")]
    Range { from: HourBucket, to: HourBucket },
    #[error("unknown station {0:?}")]
    UnknownStation(String),
    #[error("unknown export format {0:?} (expected csv or dot)")]
    UnknownFormat(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0}")]
    Parse(String),
    #[error("{path}: {source}")]
    BatchFile { path: PathBuf, source: BatchFileError },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Owns the network, every ingested snapshot and the time tree over them.
#[derive(Debug, Clone)]
pub struct GraphStore {
    network: Network,
    station_radius_m: f64,
    snapshots: Vec<Snapshot>,
    tree: TimeTree,
    batch_ids: HashSet<u64>,
}

impl GraphStore {
    pub fn new(network: Network, station_radius_m: f64) -> Self {
        GraphStore {
            network,
            station_radius_m,
            snapshots: Vec::new(),
            tree: TimeTree::new(),
            batch_ids: HashSet::new(),
        }
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn tree(&self) -> &TimeTree {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// All snapshots in chronological order.
    pub fn snapshots(&self) -> Vec<&Snapshot> {
        self.tree.iter().map(|(_, i)| &self.snapshots[i]).collect()
    }

    pub fn ingest_batch(&mut self, batch: &Batch) -> Result<&Snapshot, GraphError> {
        if self.batch_ids.contains(&batch.batch_id) {
            return Err(GraphError::DuplicateBatch(batch.batch_id));
        }
        if self.tree.get(batch.hour).is_some() {
            return Err(GraphError::DuplicateHour(batch.hour));
        }
        let snap = Snapshot::build(batch, &self.network, self.station_radius_m)?;
        self.attach(snap)
    }

    fn attach(&mut self, snap: Snapshot) -> Result<&Snapshot, GraphError> {
        let idx = self.snapshots.len();
        self.tree
            .insert(snap.hour, idx)
            .map_err(|_| GraphError::DuplicateHour(snap.hour))?;
        self.batch_ids.insert(snap.snapshot_id);
        self.snapshots.push(snap);
        Ok(&self.snapshots[idx])
    }

    /// Snapshots with hour in `[from, to]`, chronological.
    pub fn resolve_range(&self, from: HourBucket, to: HourBucket) -> Result<Vec<&Snapshot>, GraphError> {
        if from > to {
            return Err(GraphError::Range { from, to });
        }
        Ok(self
            .tree
            .range(from, to)
            .into_iter()
            .map(|(_, i)| &self.snapshots[i])
            .collect())
    }

    /// `<dir>/<YYYY>/<MM>/<DD>/<HH>`
    pub fn snapshot_dir(dir: &Path, hour: HourBucket) -> PathBuf {
        dir.join(format!("{:04}", hour.year))
            .join(format!("{:02}", hour.month))
            .join(format!("{:02}", hour.day))
            .join(format!("{:02}", hour.hour))
    }

    /// Writes `network.txt` under `dir`.
    pub fn write_network(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("network.txt"), write_network(&self.network, None))
    }

    /// Writes the snapshot at `hour` as `batch.txt` + `edges.csv`.
    pub fn persist(&self, dir: &Path, hour: HourBucket, batch: &Batch) -> io::Result<()> {
        let Some(i) = self.tree.get(hour) else {
            return Err(io::Error::new(io::ErrorKind::NotFound, format!("no snapshot at {hour}")));
        };
        let sdir = Self::snapshot_dir(dir, hour);
        fs::create_dir_all(&sdir)?;
        fs::write(sdir.join("batch.txt"), batch.to_text())?;
        fs::write(sdir.join("edges.csv"), self.snapshots[i].edges_csv(&self.network))
    }

    /// Reloads a directory written by [`write_network`](Self::write_network) and [`persist`](Self::persist).
    pub fn load(dir: &Path, station_radius_m: f64) -> Result<GraphStore, GraphError> {
        let net_text = fs::read_to_string(dir.join("network.txt"))?;
        let network = parse_network(&net_text)
            .map_err(|e| GraphError::Parse(format!("network.txt: {e}")))?
            .network;
        let mut store = GraphStore::new(network, station_radius_m);
        let mut leaves = Vec::new();
        collect_leaves(dir, 0, &mut leaves)?;
        leaves.sort();
        for leaf in leaves {
            let bpath = leaf.join("batch.txt");
            let batch = Batch::parse(&fs::read_to_string(&bpath)?)
                .map_err(|source| GraphError::BatchFile { path: bpath.clone(), source })?;
            if store.batch_ids.contains(&batch.batch_id) {
                return Err(GraphError::DuplicateBatch(batch.batch_id));
            }
            if Self::snapshot_dir(dir, batch.hour) != leaf {
                return Err(GraphError::Parse(format!(
                    "{}: batch hour {} does not match its directory",
                    bpath.display(),
                    batch.hour
                )));
            }
            let edges = fs::read_to_string(leaf.join("edges.csv"))?;
            let snap = Snapshot::from_files(&batch, &edges, &store.network)?;
            store.attach(snap)?;
        }
        Ok(store)
    }
}

fn collect_leaves(dir: &Path, depth: usize, out: &mut Vec<PathBuf>) -> io::Result<()> {
    if depth == 4 {
        if dir.join("batch.txt").is_file() {
            out.push(dir.to_path_buf());
        }
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let numeric = name.to_str().is_some_and(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()));
        if numeric && entry.file_type()?.is_dir() {
            collect_leaves(&entry.path(), depth + 1, out)?;
        }
    }
    Ok(())
}

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use super::pagerank::{pagerank_on, PageRankParams};
use super::snapshot::Snapshot;
use super::{GraphError, GraphStore};
use crate::fabric::geo_distance;
use crate::feed_model::MotionLabel;
use crate::feedgen::Network;
use crate::hour::HourBucket;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    ShortestPath,
    Degree,
    Pagerank,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeEntry {
    pub station: String,
    pub stop: u64,
    pub r#move: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Payload {
    /// `cost_s` is `None` when the stations are not connected.
    Path { nodes: Vec<String>, cost_s: Option<f64> },
    Degree(DegreeEntry),
    Scores { scores: Vec<(String, f64)>, iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub kind: QueryKind,
    pub from: HourBucket,
    pub to: HourBucket,
    pub snapshot_ids: Vec<u64>,
    pub payload: Payload,
}

impl QueryResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("query results always serialize")
    }

    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let ids: Vec<String> = self.snapshot_ids.iter().map(u64::to_string).collect();
        let kind = match self.kind {
            QueryKind::ShortestPath => "shortest-path",
            QueryKind::Degree => "degree",
            QueryKind::Pagerank => "pagerank",
        };
        let _ = writeln!(out, "{kind} over {}..{} (snapshots: {})", self.from, self.to, ids.join(" "));
        match &self.payload {
            Payload::Path { nodes, cost_s } => {
                match cost_s {
                    Some(c) => {
                        let _ = writeln!(out, "cost_s {c}");
                    }
                    None => out.push_str("no path\n"),
                }
                for (i, n) in nodes.iter().enumerate() {
                    let _ = writeln!(out, "{i:>4}  {n}");
                }
            }
            Payload::Degree(d) => {
                let _ = writeln!(out, "{:<10} {:>6} {:>6} {:>6}", "station", "stop", "move", "total");
                let _ = writeln!(out, "{:<10} {:>6} {:>6} {:>6}", d.station, d.stop, d.r#move, d.total);
            }
            Payload::Scores { scores, iterations } => {
                let _ = writeln!(out, "iterations {iterations}");
                let _ = writeln!(out, "{:<10} {:>14}", "station", "score");
                let mut sorted: Vec<&(String, f64)> = scores.iter().collect();
                sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                for (s, v) in sorted {
                    let _ = writeln!(out, "{s:<10} {v:>14.10}");
                }
                let sum: f64 = scores.iter().map(|(_, v)| v).sum();
                let _ = writeln!(out, "{:<10} {:>14.10}", "sum", sum);
            }
        }
        out
    }
}

/// Directed station-to-station transition counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StationGraph {
    pub stations: Vec<String>,
    /// `(from, to) -> transitions`, indices into `stations`; every count ≥ 1.
    pub edges: BTreeMap<(usize, usize), u64>,
}

impl StationGraph {
    /// Each vehicle's stop observations that sit at a station, taken in time
    /// order across `snapshots`, give a visit sequence (nearest station wins,
    /// repeats collapse). Every change of station is one transition.
    pub fn derive(snapshots: &[&Snapshot], network: &Network) -> StationGraph {
        let mut visits: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for snap in snapshots {
            let mut nearest: HashMap<usize, (f64, usize)> = HashMap::new();
            for e in &snap.at_edges {
                let o = &snap.observations[e.observation];
                if o.role != MotionLabel::Stop {
                    continue;
                }
                let st = &network.stations[e.station];
                let d = geo_distance((o.lat, o.lon), (st.lat, st.lon));
                let cand = (d, e.station);
                nearest
                    .entry(e.observation)
                    .and_modify(|cur| {
                        if cand.0 < cur.0 || (cand.0 == cur.0 && cand.1 < cur.1) {
                            *cur = cand;
                        }
                    })
                    .or_insert(cand);
            }
            let mut obs: Vec<usize> = nearest.keys().copied().collect();
            obs.sort_unstable();
            for i in obs {
                let seq = visits.entry(snap.observations[i].vehicle_id.as_str()).or_default();
                let s = nearest[&i].1;
                if seq.last() != Some(&s) {
                    seq.push(s);
                }
            }
        }
        let mut edges = BTreeMap::new();
        for seq in visits.values() {
            for w in seq.windows(2) {
                *edges.entry((w[0], w[1])).or_insert(0) += 1;
            }
        }
        StationGraph {
            stations: network.stations.iter().map(|s| s.id.clone()).collect(),
            edges,
        }
    }
}

impl GraphStore {
    fn snapshot_ids(snaps: &[&Snapshot]) -> Vec<u64> {
        snaps.iter().map(|s| s.snapshot_id).collect()
    }

    fn require_station(&self, id: &str) -> Result<usize, GraphError> {
        self.network()
            .station_index(id)
            .ok_or_else(|| GraphError::UnknownStation(id.to_string()))
    }

    /// Minimum total NEXT time from `from` to `to`, boarding and alighting
    /// through AT edges at cost 0. Among equal-cost paths the lexicographically
    /// smallest node-id sequence wins.
    pub fn shortest_path(
        &self,
        from: HourBucket,
        to: HourBucket,
        from_station: &str,
        to_station: &str,
    ) -> Result<QueryResult, GraphError> {
        let src = self.require_station(from_station)?;
        let dst = self.require_station(to_station)?;
        let snaps = self.resolve_range(from, to)?;
        let result = |nodes, cost_s| QueryResult {
            kind: QueryKind::ShortestPath,
            from,
            to,
            snapshot_ids: Self::snapshot_ids(&snaps),
            payload: Payload::Path { nodes, cost_s },
        };
        if src == dst {
            return Ok(result(vec![from_station.to_string()], Some(0.0)));
        }

        // Global observation numbering across the range.
        let mut offsets = Vec::with_capacity(snaps.len());
        let mut n = 0;
        for s in &snaps {
            offsets.push(n);
            n += s.observations.len();
        }
        let mut ids = Vec::with_capacity(n);
        let mut preds: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
        let mut succs: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
        let mut exits = vec![false; n];
        let mut entries = Vec::new();
        for (s, &off) in snaps.iter().zip(&offsets) {
            ids.extend(s.observations.iter().map(|o| o.id()));
            for e in &s.next_edges {
                succs[off + e.from].push((off + e.to, e.weight_ms));
                preds[off + e.to].push((off + e.from, e.weight_ms));
            }
            for e in &s.at_edges {
                if e.station == dst {
                    exits[off + e.observation] = true;
                }
                if e.station == src {
                    entries.push(off + e.observation);
                }
            }
        }

        // Reverse Dijkstra: remaining cost from each observation to the target.
        let mut dist = vec![i64::MAX; n];
        let mut heap = BinaryHeap::new();
        for (v, &x) in exits.iter().enumerate() {
            if x {
                dist[v] = 0;
                heap.push(Reverse((0i64, v)));
            }
        }
        while let Some(Reverse((d, v))) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(u, w) in &preds[v] {
                let nd = d + w;
                if nd < dist[u] {
                    dist[u] = nd;
                    heap.push(Reverse((nd, u)));
                }
            }
        }

        let best = entries.iter().map(|&v| dist[v]).min().unwrap_or(i64::MAX);
        if best == i64::MAX {
            return Ok(result(Vec::new(), None));
        }
        // Greedy walk along tight edges, smallest id first.
        let pick = |cands: &mut dyn Iterator<Item = usize>| cands.min_by(|&a, &b| ids[a].cmp(&ids[b]));
        let mut cur = pick(&mut entries.iter().copied().filter(|&v| dist[v] == best)).expect("entry exists");
        let mut nodes = vec![from_station.to_string(), ids[cur].clone()];
        // NEXT weights are positive, so alighting is the only tight move once dist hits 0.
        while dist[cur] > 0 {
            cur = pick(
                &mut succs[cur]
                    .iter()
                    .filter(|&&(v, w)| dist[v] != i64::MAX && w + dist[v] == dist[cur])
                    .map(|&(v, _)| v),
            )
            .expect("a tight successor exists while dist > 0");
            nodes.push(ids[cur].clone());
        }
        nodes.push(to_station.to_string());
        Ok(result(nodes, Some(best as f64 / 1000.0)))
    }

    /// AT edges incident to `station` across the range, split by observation role.
    pub fn degree(&self, from: HourBucket, to: HourBucket, station: &str) -> Result<QueryResult, GraphError> {
        let s = self.require_station(station)?;
        let snaps = self.resolve_range(from, to)?;
        let mut entry = DegreeEntry {
            station: station.to_string(),
            stop: 0,
            r#move: 0,
            total: 0,
        };
        for snap in &snaps {
            for e in snap.at_edges.iter().filter(|e| e.station == s) {
                match snap.observations[e.observation].role {
                    MotionLabel::Stop => entry.stop += 1,
                    MotionLabel::Move => entry.r#move += 1,
                }
                entry.total += 1;
            }
        }
        Ok(QueryResult {
            kind: QueryKind::Degree,
            from,
            to,
            snapshot_ids: Self::snapshot_ids(&snaps),
            payload: Payload::Degree(entry),
        })
    }

    pub fn station_graph(&self, from: HourBucket, to: HourBucket) -> Result<StationGraph, GraphError> {
        let snaps = self.resolve_range(from, to)?;
        Ok(StationGraph::derive(&snaps, self.network()))
    }

    /// PageRank over the station transition graph of the range. An empty
    /// range yields an empty score vector.
    pub fn pagerank(&self, from: HourBucket, to: HourBucket, params: &PageRankParams) -> Result<QueryResult, GraphError> {
        params.validate()?;
        let snaps = self.resolve_range(from, to)?;
        let (scores, iterations) = if snaps.is_empty() {
            (Vec::new(), 0)
        } else {
            let g = StationGraph::derive(&snaps, self.network());
            let r = pagerank_on(&g, params);
            (g.stations.into_iter().zip(r.scores).collect(), r.iterations)
        };
        Ok(QueryResult {
            kind: QueryKind::Pagerank,
            from,
            to,
            snapshot_ids: Self::snapshot_ids(&snaps),
            payload: Payload::Scores { scores, iterations },
        })
    }
}

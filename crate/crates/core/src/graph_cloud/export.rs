use std::fmt::Write as _;
use std::str::FromStr;

use super::{GraphError, GraphStore};
use crate::hour::HourBucket;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    EdgeList,
    Dot,
}

impl FromStr for ExportFormat {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" | "edge-list" => Ok(ExportFormat::EdgeList),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(GraphError::UnknownFormat(other.to_string())),
        }
    }
}

/// Row of `nodes.csv`. Station rows leave `vehicle_id` and `ts` empty.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRow {
    pub id: String,
    pub role: String,
    pub lat: f64,
    pub lon: f64,
    pub vehicle_id: Option<String>,
    pub ts: Option<i64>,
}

/// Row of `edges.csv`; NEXT weights in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRow {
    pub src: String,
    pub dst: String,
    pub kind: String,
    pub weight: f64,
}

/// Union graph of a range in tabular form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExportedGraph {
    pub nodes: Vec<NodeRow>,
    pub edges: Vec<EdgeRow>,
}

pub const NODES_HEADER: &str = "id,role,lat,lon,vehicle_id,ts";
pub const EDGES_HEADER: &str = "src,dst,kind,weight";

impl ExportedGraph {
    pub fn nodes_csv(&self) -> String {
        let mut out = format!("{NODES_HEADER}\n");
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                n.id,
                n.role,
                n.lat,
                n.lon,
                n.vehicle_id.as_deref().unwrap_or(""),
                n.ts.map(|t| t.to_string()).unwrap_or_default()
            );
        }
        out
    }

    pub fn edges_csv(&self) -> String {
        let mut out = format!("{EDGES_HEADER}\n");
        for e in &self.edges {
            let _ = writeln!(out, "{},{},{},{}", e.src, e.dst, e.kind, e.weight);
        }
        out
    }

    /// Directed graph; every node line carries `role=`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph trajectories {\n");
        for n in &self.nodes {
            let color = match n.role.as_str() {
                "stop" => "red",
                "move" => "green",
                _ => "blue",
            };
            let _ = writeln!(
                out,
                "  \"{}\" [role={}, color={}, lat={}, lon={}];",
                n.id, n.role, color, n.lat, n.lon
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [kind={}, weight={}];",
                e.src, e.dst, e.kind, e.weight
            );
        }
        out.push_str("}\n");
        out
    }

    /// Inverse of [`nodes_csv`](Self::nodes_csv) + [`edges_csv`](Self::edges_csv).
    pub fn from_csv(nodes_csv: &str, edges_csv: &str) -> Result<ExportedGraph, GraphError> {
        let mut g = ExportedGraph::default();
        for (i, line) in body(nodes_csv, NODES_HEADER, "nodes.csv")? {
            let bad = || GraphError::Parse(format!("nodes.csv line {}: {line:?}", i + 1));
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 6 {
                return Err(bad());
            }
            g.nodes.push(NodeRow {
                id: c[0].to_string(),
                role: c[1].to_string(),
                lat: c[2].parse().map_err(|_| bad())?,
                lon: c[3].parse().map_err(|_| bad())?,
                vehicle_id: (!c[4].is_empty()).then(|| c[4].to_string()),
                ts: if c[5].is_empty() {
                    None
                } else {
                    Some(c[5].parse().map_err(|_| bad())?)
                },
            });
        }
        for (i, line) in body(edges_csv, EDGES_HEADER, "edges.csv")? {
            let bad = || GraphError::Parse(format!("edges.csv line {}: {line:?}", i + 1));
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 4 {
                return Err(bad());
            }
            g.edges.push(EdgeRow {
                src: c[0].to_string(),
                dst: c[1].to_string(),
                kind: c[2].to_string(),
                weight: c[3].parse().map_err(|_| bad())?,
            });
        }
        Ok(g)
    }
}

fn body<'a>(text: &'a str, header: &str, name: &str) -> Result<impl Iterator<Item = (usize, &'a str)>, GraphError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => Ok(lines.filter(|(_, l)| !l.is_empty())),
        _ => Err(GraphError::Parse(format!("{name}: expected header {header:?}"))),
    }
}

impl GraphStore {
    /// Observation nodes and edges of every snapshot in range, plus all
    /// network stations when the range is non-empty.
    pub fn export_graph(&self, from: HourBucket, to: HourBucket) -> Result<ExportedGraph, GraphError> {
        let snaps = self.resolve_range(from, to)?;
        let mut g = ExportedGraph::default();
        if snaps.is_empty() {
            return Ok(g);
        }
        for s in self.network().stations.iter() {
            g.nodes.push(NodeRow {
                id: s.id.clone(),
                role: "station".into(),
                lat: s.lat,
                lon: s.lon,
                vehicle_id: None,
                ts: None,
            });
        }
        for snap in &snaps {
            for o in &snap.observations {
                g.nodes.push(NodeRow {
                    id: o.id(),
                    role: o.role.as_str().to_string(),
                    lat: o.lat,
                    lon: o.lon,
                    vehicle_id: Some(o.vehicle_id.clone()),
                    ts: Some(o.ts),
                });
            }
            for e in &snap.next_edges {
                g.edges.push(EdgeRow {
                    src: snap.observations[e.from].id(),
                    dst: snap.observations[e.to].id(),
                    kind: "NEXT".into(),
                    weight: e.weight_ms as f64 / 1000.0,
                });
            }
            for e in &snap.at_edges {
                g.edges.push(EdgeRow {
                    src: snap.observations[e.observation].id(),
                    dst: self.network().stations[e.station].id.clone(),
                    kind: "AT".into(),
                    weight: 0.0,
                });
            }
        }
        Ok(g)
    }
}

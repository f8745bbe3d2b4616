//! Python bindings: `import mobility`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mobility_core::config::PipelineConfig;
use mobility_core::feedgen::{self, FaultProfile, NetworkSpec, TripParams};
use mobility_core::graph_cloud::{ExportFormat, GraphStore, PageRankParams, Payload, DEFAULT_STATION_RADIUS_M};
use mobility_core::pipeline::run_pipeline;
use mobility_core::HourBucket;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn hour(s: Option<&str>) -> PyResult<Option<HourBucket>> {
    s.map(|s| s.parse::<HourBucket>().map_err(value_err)).transpose()
}

fn open(snapshots: &str) -> PyResult<GraphStore> {
    GraphStore::load(&PathBuf::from(snapshots), DEFAULT_STATION_RADIUS_M).map_err(runtime_err)
}

fn range(store: &GraphStore, from: Option<&str>, to: Option<&str>) -> PyResult<(HourBucket, HourBucket)> {
    match (hour(from)?.or(store.tree().first()), hour(to)?.or(store.tree().last())) {
        (Some(f), Some(t)) => Ok((f, t)),
        _ => Err(value_err("no snapshots; pass an explicit hour range")),
    }
}

/// Writes network.txt, truth.txt and feed.txt under `out`; returns counts.
#[pyfunction]
#[pyo3(signature = (
    out, routes=30, stations=642, duration=3595, cadence=5, dup=0.0, drop=0.0, corrupt=0.0,
    lateness=0.0, isolated_drops=false, seed=7, vehicles_per_route=2, hubs=3, hub_ratio=3.0, hub_routes=10
))]
#[allow(clippy::too_many_arguments)]
fn generate(
    out: &str,
    routes: usize,
    stations: usize,
    duration: u64,
    cadence: u64,
    dup: f64,
    drop: f64,
    corrupt: f64,
    lateness: f64,
    isolated_drops: bool,
    seed: u64,
    vehicles_per_route: usize,
    hubs: usize,
    hub_ratio: f64,
    hub_routes: usize,
) -> PyResult<BTreeMap<&'static str, usize>> {
    let spec = NetworkSpec {
        routes,
        stations,
        hubs,
        hub_ratio,
        hub_routes,
        rng_seed: seed,
        ..NetworkSpec::default()
    };
    let trips = TripParams {
        vehicles_per_route,
        rng_seed: seed,
        ..TripParams::default()
    };
    let faults = FaultProfile {
        duplicate_rate: dup,
        drop_rate: drop,
        corrupt_rate: corrupt,
        max_lateness_s: lateness,
        isolated_drops,
        rng_seed: seed,
    };
    let g = feedgen::generate(&spec, &trips, duration, cadence, &faults).map_err(value_err)?;
    g.write_to(&PathBuf::from(out)).map_err(runtime_err)?;
    Ok(BTreeMap::from([
        ("routes", g.network.routes.len()),
        ("stations", g.network.stations.len()),
        ("tuples", g.truth.tuple_count()),
        ("feed_lines", g.feed.lines.len()),
        ("drops", g.feed.drops()),
        ("duplicates", g.feed.duplicates()),
        ("corruptions", g.feed.corruptions()),
    ]))
}

/// Runs the pipeline; snapshots go to `<out>/snapshots`, reports to `<out>/reports`.
#[pyfunction]
#[pyo3(signature = (feed, network, out, edge_nodes=4, lateness=10.0))]
fn run(feed: &str, network: &str, out: &str, edge_nodes: usize, lateness: f64) -> PyResult<BTreeMap<&'static str, u64>> {
    let out = PathBuf::from(out);
    let cfg = PipelineConfig {
        feed: feed.into(),
        network: network.into(),
        snapshot_dir: out.join("snapshots"),
        report_dir: out.join("reports"),
        edge_nodes,
        lateness_bound_s: lateness,
        ..PipelineConfig::default()
    };
    let s = run_pipeline(&cfg).map_err(runtime_err)?;
    Ok(BTreeMap::from([
        ("in", s.tuples_in()),
        ("out", s.tuples_out()),
        ("edge_rejected", s.edge_rejected()),
        ("fabric_rejected", s.fabric_rejected()),
        ("batches", s.batches),
        ("snapshots", s.snapshots as u64),
        ("balanced", s.is_balanced() as u64),
    ]))
}

/// `(station, score)` pairs in station-id order.
#[pyfunction]
#[pyo3(signature = (snapshots, start=None, end=None, damping=0.85, tol=1e-8, max_iter=100))]
fn pagerank(
    snapshots: &str,
    start: Option<&str>,
    end: Option<&str>,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<Vec<(String, f64)>> {
    let store = open(snapshots)?;
    let (f, t) = range(&store, start, end)?;
    let params = PageRankParams { damping, tol, max_iter };
    match store.pagerank(f, t, &params).map_err(value_err)?.payload {
        Payload::Scores { scores, .. } => Ok(scores),
        _ => unreachable!(),
    }
}

/// `(nodes, cost_s)`; cost is None when unreachable.
#[pyfunction]
#[pyo3(signature = (snapshots, src, dst, start=None, end=None))]
fn shortest_path(
    snapshots: &str,
    src: &str,
    dst: &str,
    start: Option<&str>,
    end: Option<&str>,
) -> PyResult<(Vec<String>, Option<f64>)> {
    let store = open(snapshots)?;
    let (f, t) = range(&store, start, end)?;
    match store.shortest_path(f, t, src, dst).map_err(value_err)?.payload {
        Payload::Path { nodes, cost_s } => Ok((nodes, cost_s)),
        _ => unreachable!(),
    }
}

/// `{"stop": .., "move": .., "total": ..}`
#[pyfunction]
#[pyo3(signature = (snapshots, station, start=None, end=None))]
fn degree(snapshots: &str, station: &str, start: Option<&str>, end: Option<&str>) -> PyResult<BTreeMap<&'static str, u64>> {
    let store = open(snapshots)?;
    let (f, t) = range(&store, start, end)?;
    match store.degree(f, t, station).map_err(value_err)?.payload {
        Payload::Degree(d) => Ok(BTreeMap::from([("stop", d.stop), ("move", d.r#move), ("total", d.total)])),
        _ => unreachable!(),
    }
}

/// Raw JSON for any query kind, as printed by `mobility query --json`.
#[pyfunction]
#[pyo3(signature = (snapshots, kind, station=None, dst=None, start=None, end=None))]
fn query_json(
    snapshots: &str,
    kind: &str,
    station: Option<&str>,
    dst: Option<&str>,
    start: Option<&str>,
    end: Option<&str>,
) -> PyResult<String> {
    let store = open(snapshots)?;
    let (f, t) = range(&store, start, end)?;
    fn need<'a>(v: Option<&'a str>, name: &str) -> PyResult<&'a str> {
        v.ok_or_else(|| value_err(format!("missing argument {name}")))
    }
    let r = match kind {
        "pagerank" => store.pagerank(f, t, &PageRankParams::default()),
        "degree" => store.degree(f, t, need(station, "station")?),
        "shortest-path" => store.shortest_path(f, t, need(station, "station")?, need(dst, "dst")?),
        other => return Err(value_err(format!("unknown query kind {other:?}"))),
    }
    .map_err(value_err)?;
    Ok(r.to_json())
}

/// Writes nodes.csv + edges.csv (`csv`) or graph.dot (`dot`) into `out`.
#[pyfunction]
#[pyo3(signature = (snapshots, out, format="csv", start=None, end=None))]
fn export(snapshots: &str, out: &str, format: &str, start: Option<&str>, end: Option<&str>) -> PyResult<(usize, usize)> {
    let format: ExportFormat = format.parse().map_err(value_err)?;
    let store = open(snapshots)?;
    let (f, t) = range(&store, start, end)?;
    let g = store.export_graph(f, t).map_err(value_err)?;
    let out = PathBuf::from(out);
    std::fs::create_dir_all(&out).map_err(runtime_err)?;
    let files = match format {
        ExportFormat::EdgeList => vec![("nodes.csv", g.nodes_csv()), ("edges.csv", g.edges_csv())],
        ExportFormat::Dot => vec![("graph.dot", g.to_dot())],
    };
    for (name, body) in files {
        std::fs::write(out.join(name), body).map_err(runtime_err)?;
    }
    Ok((g.nodes.len(), g.edges.len()))
}

#[pymodule]
fn mobility(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(pagerank, m)?)?;
    m.add_function(wrap_pyfunction!(shortest_path, m)?)?;
    m.add_function(wrap_pyfunction!(degree, m)?)?;
    m.add_function(wrap_pyfunction!(query_json, m)?)?;
    m.add_function(wrap_pyfunction!(export, m)?)?;
    Ok(())
}

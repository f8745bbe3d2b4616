use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mobility_core::config::{PipelineConfig, CONFIG_ENV};
use mobility_core::feedgen::{generate, FaultProfile, NetworkSpec, TripParams};
use mobility_core::graph_cloud::{ExportFormat, GraphStore, PageRankParams, QueryResult};
use mobility_core::pipeline::run_pipeline;
use mobility_core::HourBucket;

#[derive(Parser)]
#[command(name = "mobility", version, about = "Edge-to-cloud transit mobility analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic network, ground truth and fault-injected feed.
    Generate(GenerateArgs),
    /// Run edge nodes, fabric and graph cloud over a feed.
    Run(RunArgs),
    /// Query the snapshot store.
    Query {
        #[command(subcommand)]
        kind: QueryCommand,
    },
    /// Export the graph of an hour range.
    Export(ExportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    routes: usize,
    #[arg(long, default_value_t = 642)]
    stations: usize,
    /// Simulated seconds; ticks run from 0 to this value inclusive.
    #[arg(long, default_value_t = 3595)]
    duration: u64,
    /// Seconds between ticks (5, 1800 and 86400 are the usual feeds).
    #[arg(long, default_value_t = 5)]
    cadence: u64,
    #[arg(long, default_value_t = 0.0)]
    dup: f64,
    #[arg(long, default_value_t = 0.0)]
    drop: f64,
    #[arg(long, default_value_t = 0.0)]
    corrupt: f64,
    /// Maximum arrival delay, seconds.
    #[arg(long, default_value_t = 0.0)]
    lateness: f64,
    /// Never drop two consecutive ticks of a vehicle, nor its first or last.
    #[arg(long)]
    isolated_drops: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    vehicles_per_route: usize,
    #[arg(long, default_value_t = 3)]
    hubs: usize,
    #[arg(long, default_value_t = 3.0)]
    hub_ratio: f64,
    /// Routes each hub station joins.
    #[arg(long, default_value_t = 10)]
    hub_routes: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Key=value config file.
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long)]
    feed: Option<PathBuf>,
    #[arg(long)]
    network: Option<PathBuf>,
    /// Output directory; snapshots and reports go to `<out>/snapshots` and `<out>/reports`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    edge_nodes: Option<usize>,
    #[arg(long)]
    lateness: Option<f64>,
    #[arg(long)]
    stop_threshold: Option<f64>,
    #[arg(long)]
    station_radius: Option<f64>,
}

#[derive(Args)]
struct StoreArgs {
    /// Snapshot directory written by `run`.
    #[arg(long)]
    snapshots: PathBuf,
    /// Machine-readable JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum QueryCommand {
    /// Fastest trip between two stations.
    ShortestPath {
        #[command(flatten)]
        store: StoreArgs,
        /// Origin station id.
        #[arg(long)]
        from: String,
        /// Destination station id.
        #[arg(long)]
        to: String,
        /// First hour (YYYY-MM-DDTHH); defaults to the earliest snapshot.
        #[arg(long)]
        start: Option<HourBucket>,
        /// Last hour, inclusive; defaults to the latest snapshot.
        #[arg(long)]
        end: Option<HourBucket>,
    },
    /// AT-edge degree of a station, split by stop/move.
    Degree {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        station: String,
        #[arg(long)]
        from: Option<HourBucket>,
        #[arg(long)]
        to: Option<HourBucket>,
    },
    /// PageRank of stations over the transition graph.
    Pagerank {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        from: Option<HourBucket>,
        #[arg(long)]
        to: Option<HourBucket>,
        #[arg(long, default_value_t = 0.85)]
        damping: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    snapshots: PathBuf,
    /// `csv` (nodes.csv + edges.csv) or `dot` (graph.dot).
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    from: Option<HourBucket>,
    #[arg(long)]
    to: Option<HourBucket>,
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let spec = NetworkSpec {
        routes: a.routes,
        stations: a.stations,
        hubs: a.hubs,
        hub_ratio: a.hub_ratio,
        hub_routes: a.hub_routes,
        rng_seed: a.seed,
        ..NetworkSpec::default()
    };
    let trips = TripParams {
        vehicles_per_route: a.vehicles_per_route,
        rng_seed: a.seed,
        ..TripParams::default()
    };
    let faults = FaultProfile {
        duplicate_rate: a.dup,
        drop_rate: a.drop,
        corrupt_rate: a.corrupt,
        max_lateness_s: a.lateness,
        isolated_drops: a.isolated_drops,
        rng_seed: a.seed,
    };
    let g = generate(&spec, &trips, a.duration, a.cadence, &faults)?;
    g.write_to(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "routes={} stations={} vehicles={} tuples={} feed_lines={} drops={} duplicates={} corruptions={}",
        g.network.routes.len(),
        g.network.stations.len(),
        g.truth.trajectories.len(),
        g.truth.tuple_count(),
        g.feed.lines.len(),
        g.feed.drops(),
        g.feed.duplicates(),
        g.feed.corruptions()
    );
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = &a.feed {
        cfg.feed = p.clone();
    }
    if let Some(p) = &a.network {
        cfg.network = p.clone();
    }
    if let Some(out) = &a.out {
        cfg.snapshot_dir = out.join("snapshots");
        cfg.report_dir = out.join("reports");
    }
    if let Some(n) = a.edge_nodes {
        cfg.edge_nodes = n;
    }
    if let Some(v) = a.lateness {
        cfg.lateness_bound_s = v;
    }
    if let Some(v) = a.stop_threshold {
        cfg.stop_threshold_m = v;
    }
    if let Some(v) = a.station_radius {
        cfg.station_radius_m = v;
    }
    let summary = run_pipeline(&cfg)?;
    println!("{}", summary.summary_line());
    Ok(())
}

fn load_store(dir: &Path) -> Result<GraphStore> {
    if !dir.join("network.txt").is_file() {
        bail!("{} is not a snapshot directory (no network.txt)", dir.display());
    }
    // AT edges are read back from disk, so the radius only matters for new ingests.
    GraphStore::load(dir, mobility_core::graph_cloud::DEFAULT_STATION_RADIUS_M)
        .with_context(|| format!("loading {}", dir.display()))
}

fn range(store: &GraphStore, from: Option<HourBucket>, to: Option<HourBucket>) -> Result<(HourBucket, HourBucket)> {
    match (from.or(store.tree().first()), to.or(store.tree().last())) {
        (Some(f), Some(t)) => Ok((f, t)),
        _ => bail!("snapshot directory holds no snapshots; pass an explicit hour range"),
    }
}

fn emit(r: &QueryResult, json: bool) {
    if json {
        println!("{}", r.to_json());
    } else {
        print!("{}", r.to_table());
    }
}

fn cmd_query(q: &QueryCommand) -> Result<()> {
    match q {
        QueryCommand::ShortestPath {
            store,
            from,
            to,
            start,
            end,
        } => {
            let s = load_store(&store.snapshots)?;
            let (f, t) = range(&s, *start, *end)?;
            emit(&s.shortest_path(f, t, from, to)?, store.json);
        }
        QueryCommand::Degree {
            store,
            station,
            from,
            to,
        } => {
            let s = load_store(&store.snapshots)?;
            let (f, t) = range(&s, *from, *to)?;
            emit(&s.degree(f, t, station)?, store.json);
        }
        QueryCommand::Pagerank {
            store,
            from,
            to,
            damping,
            tol,
            max_iter,
        } => {
            let s = load_store(&store.snapshots)?;
            let (f, t) = range(&s, *from, *to)?;
            let params = PageRankParams {
                damping: *damping,
                tol: *tol,
                max_iter: *max_iter,
            };
            emit(&s.pagerank(f, t, &params)?, store.json);
        }
    }
    Ok(())
}

fn cmd_export(a: &ExportArgs) -> Result<()> {
    let format: ExportFormat = a.format.parse()?;
    let s = load_store(&a.snapshots)?;
    let (f, t) = range(&s, a.from, a.to)?;
    let g = s.export_graph(f, t)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let files = match format {
        ExportFormat::EdgeList => vec![("nodes.csv", g.nodes_csv()), ("edges.csv", g.edges_csv())],
        ExportFormat::Dot => vec![("graph.dot", g.to_dot())],
    };
    for (name, body) in files {
        let p = a.out.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("nodes={} edges={}", g.nodes.len(), g.edges.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{first}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Query { kind } => cmd_query(kind),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

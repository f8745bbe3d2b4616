//! Synthetic transit network, trip simulation and fault injection.
//!
//! The generator stands in for a real vehicle feed: it produces a network,
//! ideal per-vehicle trajectories (the ground truth), and a faulty replay of
//! them together with a ledger of every injected fault.

mod faults;
mod network;
mod trips;

use std::fs;
use std::path::Path;

use thiserror::Error;

pub use faults::{emit_feed, CoreField, CorruptClass, FaultKind, FaultProfile, FaultRecord, Feed};
pub use network::{
    generate_network, parse_network, write_network, BoundingBox, Network, NetworkFile, NetworkSpec, Route,
    SessionWindow, Station,
};
pub use trips::{
    simulate_trips, DwellEvent, GroundTruth, Trajectory, TripParams, CADENCE_PRESETS_S, DEFAULT_SESSION_START_MS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

/// Everything one `generate` run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub network: Network,
    pub truth: GroundTruth,
    pub feed: Feed,
}

pub fn generate(
    spec: &NetworkSpec,
    trips: &TripParams,
    duration_s: u64,
    cadence_s: u64,
    faults: &FaultProfile,
) -> Result<Generated, ConfigError> {
    let network = generate_network(spec)?;
    let truth = simulate_trips(&network, trips, duration_s, cadence_s)?;
    let feed = emit_feed(&truth, faults)?;
    Ok(Generated { network, truth, feed })
}

impl Generated {
    /// Writes `feed.txt`, `truth.txt`, `ledger.txt`, `network.txt`,
    /// `dwells.txt` and `weights.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("feed.txt"), self.feed.feed_text())?;
        fs::write(dir.join("truth.txt"), self.truth.truth_text())?;
        fs::write(dir.join("ledger.txt"), self.feed.ledger_text())?;
        fs::write(dir.join("network.txt"), write_network(&self.network, Some(self.truth.session)))?;
        fs::write(dir.join("dwells.txt"), self.truth.dwells_text())?;
        fs::write(dir.join("weights.txt"), self.truth.weights_text())?;
        Ok(())
    }
}

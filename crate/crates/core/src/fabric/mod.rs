//! Access-layer fabric: ordering under a lateness bound, stop/move
//! contextualization, hourly batching toward the cloud, and the control
//! channel back to edge nodes.

mod batch;
mod context;
mod downstream;
mod geo;
mod reorder;
mod watermark;

use std::fmt::Write as _;

pub use batch::{assemble_batches, Batch, BatchAssembler, BatchFileError};
pub use context::{contextualize, label_for_distance, Contextualizer, DEFAULT_STOP_THRESHOLD_M};
pub use downstream::{
    decode_frames, encode_frame, Ack, ControlKind, ControlMessage, Destination, DownstreamRouter, FrameError,
    RoutingError,
};
pub use geo::{geo_distance, offset_meters, METERS_PER_DEGREE};
pub use reorder::{reorder, Reorderer};
pub use watermark::Watermark;

use crate::feed_model::{CleanTuple, ContextTuple, RejectReason, RejectRecord};

pub const DEFAULT_LATENESS_BOUND_S: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FabricConfig {
    pub lateness_bound_s: f64,
    pub stop_threshold_m: f64,
}

impl Default for FabricConfig {
    fn default() -> Self {
        FabricConfig {
            lateness_bound_s: DEFAULT_LATENESS_BOUND_S,
            stop_threshold_m: DEFAULT_STOP_THRESHOLD_M,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FabricMetrics {
    pub received: u64,
    pub emitted: u64,
    pub late_drops: u64,
    pub duplicate_drops: u64,
    pub batches_closed: u64,
    pub watermark_advances: u64,
}

impl FabricMetrics {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "received={}", self.received);
        let _ = writeln!(out, "emitted={}", self.emitted);
        let _ = writeln!(out, "late_drops={}", self.late_drops);
        let _ = writeln!(out, "duplicate_drops={}", self.duplicate_drops);
        let _ = writeln!(out, "batches_closed={}", self.batches_closed);
        out
    }
}

/// What one input event caused downstream.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct FabricStep {
    pub emitted: Vec<ContextTuple>,
    pub rejects: Vec<RejectRecord>,
    pub closed: Vec<Batch>,
}

impl FabricStep {
    fn absorb(&mut self, other: FabricStep) {
        self.emitted.extend(other.emitted);
        self.rejects.extend(other.rejects);
        self.closed.extend(other.closed);
    }
}

/// Single serialized control point of the fabric. Inputs arrive tagged with
/// their source (edge node) id.
#[derive(Debug)]
pub struct Fabric {
    watermark: Watermark,
    reorderer: Reorderer,
    context: Contextualizer,
    batches: BatchAssembler,
    metrics: FabricMetrics,
    history: Vec<i64>,
}

impl Fabric {
    pub fn new(sources: impl IntoIterator<Item = usize>, cfg: &FabricConfig) -> Self {
        let watermark = Watermark::new(sources, cfg.lateness_bound_s);
        Fabric {
            history: vec![watermark.current()],
            watermark,
            reorderer: Reorderer::new(),
            context: Contextualizer::new(cfg.stop_threshold_m),
            batches: BatchAssembler::new(),
            metrics: FabricMetrics::default(),
        }
    }

    pub fn watermark(&self) -> i64 {
        self.watermark.current()
    }

    /// Every distinct watermark value, in order.
    pub fn watermark_history(&self) -> &[i64] {
        &self.history
    }

    pub fn metrics(&self) -> &FabricMetrics {
        &self.metrics
    }

    pub fn push(&mut self, source: usize, t: CleanTuple) -> FabricStep {
        self.metrics.received += 1;
        let ts = t.ts;
        let mut step = FabricStep::default();
        if let Err(r) = self.reorderer.insert(t, self.watermark.current()) {
            match r.reason {
                RejectReason::LateDrop => self.metrics.late_drops += 1,
                _ => self.metrics.duplicate_drops += 1,
            }
            step.rejects.push(r);
            return step;
        }
        let w = self.watermark.observe(source, ts);
        step.absorb(self.advance(w));
        step
    }

    pub fn push_all(&mut self, source: usize, tuples: impl IntoIterator<Item = CleanTuple>) -> FabricStep {
        let mut step = FabricStep::default();
        for t in tuples {
            step.absorb(self.push(source, t));
        }
        step
    }

    pub fn close_source(&mut self, source: usize) -> FabricStep {
        let w = self.watermark.close(source);
        self.advance(w)
    }

    fn advance(&mut self, w: i64) -> FabricStep {
        if self.history.last() != Some(&w) {
            self.history.push(w);
            self.metrics.watermark_advances += 1;
        }
        let mut step = FabricStep::default();
        for t in self.reorderer.release(w) {
            let c = self.context.label(t);
            self.batches.add(c.clone());
            step.emitted.push(c);
        }
        step.closed = self.batches.close_ready(w);
        self.metrics.emitted += step.emitted.len() as u64;
        self.metrics.batches_closed += step.closed.len() as u64;
        step
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hour::HOUR_MS;

    const H: i64 = 1_465_387_200_000;

    fn t(vehicle: &str, ts: i64, lat: f64) -> CleanTuple {
        CleanTuple {
            route_id: "r1".into(),
            route_number: "1".into(),
            vehicle_id: vehicle.into(),
            lat,
            lon: -64.8,
            ts,
            arrival_seq: 0,
        }
    }

    #[test]
    fn two_sources_hold_watermark() {
        let mut f = Fabric::new([0, 1], &FabricConfig::default());
        let s = f.push(0, t("a", H + 60_000, 46.0));
        assert!(s.emitted.is_empty());
        let s = f.push(1, t("b", H + 60_000, 46.0));
        assert!(s.emitted.is_empty(), "bound keeps both pending");
        f.push(0, t("a", H + 80_000, 46.001));
        let s = f.push(1, t("b", H + 80_000, 46.0));
        assert_eq!(s.emitted.len(), 2);
        let s = f.close_source(0);
        assert!(s.emitted.is_empty());
        let s = f.close_source(1);
        assert_eq!(s.emitted.len(), 2);
        assert_eq!(s.closed.len(), 1);
        assert_eq!(s.closed[0].tuples.len(), 4);
        assert!(f.watermark_history().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn late_tuple_rejected_and_counted() {
        let mut f = Fabric::new([0], &FabricConfig::default());
        f.push(0, t("a", H + 100_000, 46.0));
        let s = f.push(0, t("a", H + 50_000, 46.0));
        assert_eq!(s.rejects.len(), 1);
        assert_eq!(s.rejects[0].reason, RejectReason::LateDrop);
        assert_eq!(f.metrics().late_drops, 1);
    }

    #[test]
    fn batches_close_in_hour_order() {
        let mut f = Fabric::new([0], &FabricConfig::default());
        let mut closed = Vec::new();
        for k in 0..(3 * 720) {
            closed.extend(f.push(0, t("a", H + k * 5000, 46.0)).closed);
        }
        closed.extend(f.close_source(0).closed);
        assert_eq!(closed.len(), 3);
        for (i, b) in closed.iter().enumerate() {
            assert_eq!(b.batch_id, i as u64);
            assert_eq!(b.tuples.len(), 720);
            assert_eq!(b.hour.start_ms(), H + i as i64 * HOUR_MS);
        }
    }
}

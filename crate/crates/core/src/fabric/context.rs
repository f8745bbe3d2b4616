use std::collections::HashMap;

use super::geo::geo_distance;
use crate::feed_model::{CleanTuple, ContextTuple, MotionLabel};

pub const DEFAULT_STOP_THRESHOLD_M: f64 = 15.0;

/// Stop iff strictly closer than the threshold to the vehicle's previous tuple.
pub fn label_for_distance(d: f64, threshold_m: f64) -> MotionLabel {
    if d < threshold_m {
        MotionLabel::Stop
    } else {
        MotionLabel::Move
    }
}

/// Per-vehicle predecessor state for stop/move labelling.
#[derive(Debug, Clone)]
pub struct Contextualizer {
    threshold_m: f64,
    last: HashMap<String, (f64, f64, i64)>,
}

impl Contextualizer {
    pub fn new(threshold_m: f64) -> Self {
        Contextualizer {
            threshold_m,
            last: HashMap::new(),
        }
    }

    pub fn threshold_m(&self) -> f64 {
        self.threshold_m
    }

    /// Labels `t` against the vehicle's previous tuple. Callers feed each
    /// vehicle in strictly increasing ts order.
    pub fn label(&mut self, t: CleanTuple) -> ContextTuple {
        let here = (t.lat, t.lon);
        let prev = self.last.insert(t.vehicle_id.clone(), (t.lat, t.lon, t.ts));
        debug_assert!(prev.is_none_or(|p| p.2 < t.ts));
        match prev {
            None => ContextTuple {
                tuple: t,
                label: MotionLabel::Move,
                dist_prev_m: None,
            },
            Some((lat, lon, _)) => {
                let d = geo_distance((lat, lon), here);
                ContextTuple {
                    tuple: t,
                    label: label_for_distance(d, self.threshold_m),
                    dist_prev_m: Some(d),
                }
            }
        }
    }
}

pub fn contextualize<I>(stream: I, state: &mut Contextualizer) -> Vec<ContextTuple>
where
    I: IntoIterator<Item = CleanTuple>,
{
    stream.into_iter().map(|t| state.label(t)).collect()
}

use std::collections::BTreeMap;

/// Per-source progress tracker.
///
/// The watermark is the minimum over open sources of their highest seen
/// timestamp, minus the lateness bound. A source that has sent nothing yet
/// holds the watermark at `i64::MIN`; a closed source no longer holds it back.
/// The value never decreases.
#[derive(Debug, Clone)]
pub struct Watermark {
    lateness_ms: i64,
    high: BTreeMap<usize, Option<i64>>,
    current: i64,
}

impl Watermark {
    pub fn new(sources: impl IntoIterator<Item = usize>, lateness_bound_s: f64) -> Self {
        let mut w = Watermark {
            lateness_ms: (lateness_bound_s * 1000.0).round() as i64,
            high: sources.into_iter().map(|s| (s, None)).collect(),
            current: i64::MIN,
        };
        w.recompute();
        w
    }

    pub fn lateness_ms(&self) -> i64 {
        self.lateness_ms
    }

    pub fn current(&self) -> i64 {
        self.current
    }

    /// Records a timestamp from `source` and returns the (possibly advanced) watermark.
    pub fn observe(&mut self, source: usize, ts: i64) -> i64 {
        if let Some(h) = self.high.get_mut(&source) {
            *h = Some(h.map_or(ts, |h| h.max(ts)));
        }
        self.recompute()
    }

    pub fn close(&mut self, source: usize) -> i64 {
        self.high.remove(&source);
        self.recompute()
    }

    fn recompute(&mut self) -> i64 {
        let candidate = if self.high.is_empty() {
            i64::MAX
        } else if self.high.values().any(Option::is_none) {
            i64::MIN
        } else {
            self.high
                .values()
                .flatten()
                .min()
                .copied()
                .expect("non-empty")
                .saturating_sub(self.lateness_ms)
        };
        self.current = self.current.max(candidate);
        self.current
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_over_sources_minus_bound() {
        let mut w = Watermark::new([0, 1], 10.0);
        assert_eq!(w.observe(0, 100_000), i64::MIN);
        assert_eq!(w.observe(1, 50_000), 40_000);
        assert_eq!(w.observe(1, 200_000), 90_000);
        assert_eq!(w.close(0), 190_000);
        assert_eq!(w.close(1), i64::MAX);
    }

    #[test]
    fn never_decreases() {
        let mut w = Watermark::new([0], 5.0);
        w.observe(0, 100_000);
        let a = w.current();
        w.observe(0, 20_000);
        assert_eq!(w.current(), a);
    }
}

use super::query::StationGraph;
use super::GraphError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams {
            damping: 0.85,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

impl PageRankParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(GraphError::InvalidParameter(format!("damping {} not in (0, 1)", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(GraphError::InvalidParameter(format!("tol {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(GraphError::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankScores {
    /// Parallel to the graph's stations.
    pub scores: Vec<f64>,
    pub iterations: usize,
}

/// Weighted power iteration with uniform teleport. Rank held by stations
/// without out-edges is spread uniformly. Stops when the L1 change drops
/// below `tol` or after `max_iter` sweeps.
pub fn pagerank_on(g: &StationGraph, params: &PageRankParams) -> PageRankScores {
    let n = g.stations.len();
    if n == 0 {
        return PageRankScores {
            scores: Vec::new(),
            iterations: 0,
        };
    }
    let mut out_weight = vec![0.0f64; n];
    for (&(u, _), &w) in &g.edges {
        out_weight[u] += w as f64;
    }
    let links: Vec<(usize, usize, f64)> = g
        .edges
        .iter()
        .map(|(&(u, v), &w)| (u, v, w as f64 / out_weight[u]))
        .collect();

    let d = params.damping;
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&i| out_weight[i] == 0.0).map(|i| rank[i]).sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        next.fill(base);
        for &(u, v, p) in &links {
            next[v] += d * rank[u] * p;
        }
        let delta: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if delta < params.tol {
            break;
        }
    }
    let sum: f64 = rank.iter().sum();
    for r in &mut rank {
        *r /= sum;
    }
    PageRankScores { scores: rank, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn graph(n: usize, edges: &[((usize, usize), u64)]) -> StationGraph {
        StationGraph {
            stations: (0..n).map(|i| format!("s{i}")).collect(),
            edges: edges.iter().copied().collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn symmetric_pair() {
        let r = pagerank_on(&graph(2, &[((0, 1), 3), ((1, 0), 3)]), &PageRankParams::default());
        assert!((r.scores[0] - 0.5).abs() < 1e-12);
        assert!((r.scores[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_isolated_station() {
        let r = pagerank_on(&graph(1, &[]), &PageRankParams::default());
        assert_eq!(r.scores, vec![1.0]);
    }

    #[test]
    fn sink_collects_rank() {
        let r = pagerank_on(&graph(3, &[((0, 2), 1), ((1, 2), 1)]), &PageRankParams::default());
        assert!(r.scores[2] > r.scores[0]);
        assert!((r.scores[0] - r.scores[1]).abs() < 1e-15);
    }

    #[test]
    fn bad_damping_rejected() {
        let p = PageRankParams {
            damping: 1.0,
            ..PageRankParams::default()
        };
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn normalized_and_nonnegative(
            n in 1usize..12,
            raw in proptest::collection::vec((0usize..12, 0usize..12, 1u64..5), 0..40),
        ) {
            let edges: Vec<_> = raw.into_iter().filter(|&(u, v, _)| u < n && v < n).map(|(u, v, w)| ((u, v), w)).collect();
            let r = pagerank_on(&graph(n, &edges), &PageRankParams::default());
            let sum: f64 = r.scores.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(r.scores.iter().all(|&s| s >= 0.0));
            let again = pagerank_on(&graph(n, &edges), &PageRankParams::default());
            prop_assert_eq!(r, again);
        }
    }
}

use std::collections::HashMap;
use std::fmt::Write as _;

use super::GraphError;
use crate::fabric::{geo_distance, Batch};
use crate::feed_model::MotionLabel;
use crate::feedgen::Network;
use crate::hour::HourBucket;

/// One contextualized tuple as a graph node.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationNode {
    pub vehicle_id: String,
    pub ts: i64,
    pub lat: f64,
    pub lon: f64,
    pub role: MotionLabel,
}

impl ObservationNode {
    /// `<vehicle_id>@<ts>`; unique because cleaning removed duplicate keys.
    pub fn id(&self) -> String {
        format!("{}@{}", self.vehicle_id, self.ts)
    }
}

/// Consecutive observations of one vehicle; weight is the time gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NextEdge {
    pub from: usize,
    pub to: usize,
    pub weight_ms: i64,
}

/// Observation within the station radius of a station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtEdge {
    pub observation: usize,
    /// Index into the network's station list.
    pub station: usize,
}

/// Static trajectory graph of one hour. Station nodes are the network's
/// stations and are referenced by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub snapshot_id: u64,
    pub hour: HourBucket,
    /// Sorted by `(vehicle_id, ts)`.
    pub observations: Vec<ObservationNode>,
    pub next_edges: Vec<NextEdge>,
    pub at_edges: Vec<AtEdge>,
}

impl Snapshot {
    pub fn build(batch: &Batch, network: &Network, station_radius_m: f64) -> Result<Snapshot, GraphError> {
        if !batch.closed {
            return Err(GraphError::BatchNotClosed(batch.batch_id));
        }
        let mut observations = Vec::with_capacity(batch.tuples.len());
        for c in &batch.tuples {
            if !batch.hour.contains(c.tuple.ts) {
                return Err(GraphError::CorruptBatch {
                    batch_id: batch.batch_id,
                    ts: c.tuple.ts,
                });
            }
            observations.push(ObservationNode {
                vehicle_id: c.tuple.vehicle_id.clone(),
                ts: c.tuple.ts,
                lat: c.tuple.lat,
                lon: c.tuple.lon,
                role: c.label,
            });
        }
        observations.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id).then(a.ts.cmp(&b.ts)));
        if let Some(w) = observations
            .windows(2)
            .find(|w| w[0].vehicle_id == w[1].vehicle_id && w[0].ts == w[1].ts)
        {
            return Err(GraphError::CorruptBatch {
                batch_id: batch.batch_id,
                ts: w[0].ts,
            });
        }

        let next_edges = observations
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].vehicle_id == w[1].vehicle_id)
            .map(|(i, w)| NextEdge {
                from: i,
                to: i + 1,
                weight_ms: w[1].ts - w[0].ts,
            })
            .collect();

        // Stations sorted by latitude; only a latitude band can be in range.
        let lat_slack = station_radius_m / crate::fabric::METERS_PER_DEGREE * (1.0 + 1e-9);
        let mut by_lat: Vec<(f64, usize)> = network.stations.iter().enumerate().map(|(i, s)| (s.lat, i)).collect();
        by_lat.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut at_edges = Vec::new();
        let mut near = Vec::new();
        for (i, o) in observations.iter().enumerate() {
            let lo = by_lat.partition_point(|&(lat, _)| lat < o.lat - lat_slack);
            near.clear();
            for &(lat, s) in &by_lat[lo..] {
                if lat > o.lat + lat_slack {
                    break;
                }
                let st = &network.stations[s];
                if geo_distance((o.lat, o.lon), (st.lat, st.lon)) <= station_radius_m {
                    near.push(s);
                }
            }
            near.sort_unstable();
            at_edges.extend(near.iter().map(|&s| AtEdge {
                observation: i,
                station: s,
            }));
        }

        Ok(Snapshot {
            snapshot_id: batch.batch_id,
            hour: batch.hour,
            observations,
            next_edges,
            at_edges,
        })
    }

    /// `src,dst,kind,weight` with a header; NEXT weights in seconds, AT weights 0.
    pub fn edges_csv(&self, network: &Network) -> String {
        let mut out = String::from("src,dst,kind,weight\n");
        for e in &self.next_edges {
            let _ = writeln!(
                out,
                "{},{},NEXT,{}",
                self.observations[e.from].id(),
                self.observations[e.to].id(),
                e.weight_ms as f64 / 1000.0
            );
        }
        for e in &self.at_edges {
            let _ = writeln!(
                out,
                "{},{},AT,0",
                self.observations[e.observation].id(),
                network.stations[e.station].id
            );
        }
        out
    }

    /// Rebuilds a snapshot from its batch file and stored edge list.
    pub fn from_files(batch: &Batch, edges_csv: &str, network: &Network) -> Result<Snapshot, GraphError> {
        let mut snap = Snapshot::build(batch, network, 0.0)?;
        snap.at_edges.clear();
        let index: HashMap<String, usize> = snap
            .observations
            .iter()
            .enumerate()
            .map(|(i, o)| (o.id(), i))
            .collect();
        let mut next = Vec::new();
        for (n, line) in edges_csv.lines().enumerate().skip(1) {
            let bad = || GraphError::Parse(format!("edges.csv line {}: {line:?}", n + 1));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad());
            }
            let src = *index.get(cols[0]).ok_or_else(bad)?;
            match cols[2] {
                "NEXT" => {
                    let dst = *index.get(cols[1]).ok_or_else(bad)?;
                    let secs: f64 = cols[3].parse().map_err(|_| bad())?;
                    next.push(NextEdge {
                        from: src,
                        to: dst,
                        weight_ms: (secs * 1000.0).round() as i64,
                    });
                }
                "AT" => {
                    let station = network.station_index(cols[1]).ok_or_else(bad)?;
                    snap.at_edges.push(AtEdge {
                        observation: src,
                        station,
                    });
                }
                _ => return Err(bad()),
            }
        }
        if next != snap.next_edges {
            return Err(GraphError::Parse(format!(
                "edges.csv NEXT edges of snapshot {} disagree with its batch",
                snap.snapshot_id
            )));
        }
        Ok(snap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::test_support::{ctx, network_at, H};
    use crate::fabric::offset_meters;
    use crate::feed_model::ContextTuple;

    fn batch(tuples: Vec<ContextTuple>) -> Batch {
        super::super::test_support::batch(0, H, tuples)
    }

    #[test]
    fn four_tuples_three_next_edges() {
        let o = (46.0, -64.8);
        let net = network_at(&[o]);
        let tuples = (0..4)
            .map(|k| ctx("bus", offset_meters(o, 100.0 * k as f64 + 500.0, 0.0), H + k * 5000, MotionLabel::Move))
            .collect();
        let s = Snapshot::build(&batch(tuples), &net, 30.0).unwrap();
        assert_eq!(s.observations.len(), 4);
        assert_eq!(s.next_edges.len(), 3);
        assert!(s.next_edges.iter().all(|e| e.weight_ms == 5000));
        assert!(s.at_edges.is_empty());
    }

    #[test]
    fn at_edge_within_radius_only() {
        let o = (46.0, -64.8);
        let net = network_at(&[o]);
        let tuples = vec![
            ctx("bus", offset_meters(o, 10.0, 0.0), H, MotionLabel::Stop),
            ctx("bus", offset_meters(o, 0.0, 31.0), H + 5000, MotionLabel::Move),
        ];
        let s = Snapshot::build(&batch(tuples), &net, 30.0).unwrap();
        assert_eq!(
            s.at_edges,
            vec![AtEdge {
                observation: 0,
                station: 0
            }]
        );
    }

    #[test]
    fn vehicles_form_separate_chains() {
        let o = (46.0, -64.8);
        let net = network_at(&[o]);
        let tuples = vec![
            ctx("b", o, H, MotionLabel::Move),
            ctx("a", o, H + 5000, MotionLabel::Move),
            ctx("a", o, H, MotionLabel::Move),
            ctx("b", o, H + 10_000, MotionLabel::Stop),
        ];
        let s = Snapshot::build(&batch(tuples), &net, 30.0).unwrap();
        assert_eq!(s.next_edges.len(), 2);
        assert_eq!(s.next_edges[1].weight_ms, 10_000);
    }

    #[test]
    fn tuple_outside_hour_is_corrupt() {
        let net = network_at(&[(46.0, -64.8)]);
        let b = batch(vec![ctx("bus", (46.0, -64.8), H + 3_600_000, MotionLabel::Move)]);
        assert!(matches!(
            Snapshot::build(&b, &net, 30.0),
            Err(GraphError::CorruptBatch { .. })
        ));
    }

    #[test]
    fn edges_file_round_trip() {
        let o = (46.0, -64.8);
        let net = network_at(&[o, offset_meters(o, 200.0, 0.0)]);
        let tuples = (0..6)
            .map(|k| ctx("bus", offset_meters(o, 40.0 * k as f64, 0.0), H + k * 5000, MotionLabel::Move))
            .collect();
        let b = batch(tuples);
        let s = Snapshot::build(&b, &net, 30.0).unwrap();
        let rebuilt = Snapshot::from_files(&b, &s.edges_csv(&net), &net).unwrap();
        assert_eq!(rebuilt, s);
    }
}

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{Network, SessionWindow};
use super::ConfigError;
use crate::fabric::{geo_distance, offset_meters, Contextualizer, DEFAULT_STOP_THRESHOLD_M};
use crate::feed_model::{CleanTuple, ContextTuple, WireFormat};

/// 2016-06-08T12:00:00Z.
pub const DEFAULT_SESSION_START_MS: i64 = 1_465_387_200_000;

/// Cadence presets for the feed: every 5 s, every 30 min, daily.
pub const CADENCE_PRESETS_S: [u64; 3] = [5, 1800, 86_400];

#[derive(Debug, Clone, PartialEq)]
pub struct TripParams {
    pub speed_mps: f64,
    pub vehicles_per_route: usize,
    /// Dwell probability at the heaviest station; others scale by weight.
    pub max_dwell_probability: f64,
    pub max_dwell_ticks: u32,
    /// GPS jitter radius while dwelling.
    pub dwell_jitter_m: f64,
    pub session_start_ms: i64,
    pub rng_seed: u64,
}

impl Default for TripParams {
    fn default() -> Self {
        TripParams {
            speed_mps: 10.0,
            vehicles_per_route: 2,
            max_dwell_probability: 1.0,
            max_dwell_ticks: 6,
            dwell_jitter_m: 2.0,
            session_start_ms: DEFAULT_SESSION_START_MS,
            rng_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub vehicle_id: String,
    pub route_id: String,
    /// Ideal tuples in ts order, labelled by the stop/move rule.
    pub tuples: Vec<ContextTuple>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwellEvent {
    pub vehicle_id: String,
    pub station_id: String,
    /// Timestamp of the tick at which the vehicle reached the station.
    pub arrival_ts: i64,
    pub ticks: u32,
    pub duration_s: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub session: SessionWindow,
    pub cadence_s: u64,
    pub trajectories: Vec<Trajectory>,
    pub dwells: Vec<DwellEvent>,
    /// `(station_id, transfer-traffic weight)`.
    pub weights: Vec<(String, f64)>,
}

impl GroundTruth {
    pub fn tuple_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.tuples.len()).sum()
    }

    /// All truth tuples ordered by `(ts, vehicle_id)`.
    pub fn ordered(&self) -> Vec<&ContextTuple> {
        let mut all: Vec<&ContextTuple> = self.trajectories.iter().flat_map(|t| &t.tuples).collect();
        all.sort_by(|a, b| {
            a.tuple
                .ts
                .cmp(&b.tuple.ts)
                .then_with(|| a.tuple.vehicle_id.cmp(&b.tuple.vehicle_id))
        });
        all
    }

    pub fn truth_text(&self) -> String {
        let mut out = String::new();
        for t in self.ordered() {
            out.push_str(&t.to_wire());
            out.push('\n');
        }
        out
    }

    pub fn dwells_text(&self) -> String {
        let mut out = String::from("# vehicle_id,station_id,arrival_ts,duration_s\n");
        for d in &self.dwells {
            let _ = writeln!(out, "{},{},{},{}", d.vehicle_id, d.station_id, d.arrival_ts, d.duration_s);
        }
        out
    }

    pub fn weights_text(&self) -> String {
        let mut out = String::from("# station_id,weight\n");
        for (s, w) in &self.weights {
            let _ = writeln!(out, "{s},{w}");
        }
        out
    }
}

struct Leg {
    from: (f64, f64),
    to: (f64, f64),
    /// Index into `Network::stations` of the leg's end.
    to_station: usize,
    len: f64,
}

const EPS_M: f64 = 1e-9;

/// Drives every vehicle around its route loop, one tuple per cadence tick
/// over `[0, duration_s]` inclusive.
pub fn simulate_trips(
    network: &Network,
    params: &TripParams,
    duration_s: u64,
    cadence_s: u64,
) -> Result<GroundTruth, ConfigError> {
    if duration_s == 0 || cadence_s == 0 {
        return Err(ConfigError::new("duration and cadence must be positive"));
    }
    if params.speed_mps <= 0.0 || params.vehicles_per_route == 0 {
        return Err(ConfigError::new("speed and vehicles_per_route must be positive"));
    }
    if !(0.0..=1.0).contains(&params.max_dwell_probability) {
        return Err(ConfigError::new("max_dwell_probability must be in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let max_w = network.weights.iter().copied().fold(0.0, f64::max);
    let dwell_p: Vec<f64> = network
        .weights
        .iter()
        .map(|w| if max_w > 0.0 { params.max_dwell_probability * w / max_w } else { 0.0 })
        .collect();

    let ticks = duration_s / cadence_s;
    let step_m = params.speed_mps * cadence_s as f64;
    let cadence_ms = cadence_s as i64 * 1000;
    let mut trajectories = Vec::new();
    let mut dwells = Vec::new();

    for route in &network.routes {
        let legs = route_legs(network, &route.stations)?;
        let loop_len: f64 = legs.iter().map(|l| l.len).sum();
        for j in 0..params.vehicles_per_route {
            let vehicle_id = format!("bus{}-{}", route.number, j);
            let mut leg = 0usize;
            let mut offset = if loop_len > 0.0 {
                (j as f64 * route.headway_s * params.speed_mps) % loop_len
            } else {
                0.0
            };
            while offset > legs[leg].len {
                offset -= legs[leg].len;
                leg = (leg + 1) % legs.len();
            }
            let mut dwell_left = 0u32;
            let mut jitter = false;
            let mut clean = Vec::with_capacity(ticks as usize + 1);

            for n in 0..=ticks {
                let ts = params.session_start_ms + n as i64 * cadence_ms;
                let l = &legs[leg];
                let (mut lat, mut lon) = if l.len > 0.0 {
                    let f = (offset / l.len).min(1.0);
                    (l.from.0 + f * (l.to.0 - l.from.0), l.from.1 + f * (l.to.1 - l.from.1))
                } else {
                    l.from
                };
                if jitter && params.dwell_jitter_m > 0.0 {
                    let r = rng.gen_range(0.0..params.dwell_jitter_m);
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    (lat, lon) = offset_meters((lat, lon), r * theta.sin(), r * theta.cos());
                }
                clean.push(CleanTuple {
                    route_id: route.id.clone(),
                    route_number: route.number.clone(),
                    vehicle_id: vehicle_id.clone(),
                    lat,
                    lon,
                    ts,
                    arrival_seq: 0,
                });

                if dwell_left > 0 {
                    dwell_left -= 1;
                    jitter = true;
                    continue;
                }
                jitter = false;
                let mut remaining = step_m;
                loop {
                    let to_end = legs[leg].len - offset;
                    if remaining < to_end - EPS_M {
                        offset += remaining;
                        break;
                    }
                    remaining -= to_end;
                    let station = legs[leg].to_station;
                    leg = (leg + 1) % legs.len();
                    offset = 0.0;
                    if rng.gen_bool(dwell_p[station]) {
                        let k = rng.gen_range(1..=params.max_dwell_ticks.max(1));
                        dwell_left = k;
                        dwells.push(DwellEvent {
                            vehicle_id: vehicle_id.clone(),
                            station_id: network.stations[station].id.clone(),
                            arrival_ts: ts + cadence_ms,
                            ticks: k,
                            duration_s: k as u64 * cadence_s,
                        });
                        break;
                    }
                    if loop_len <= EPS_M {
                        break;
                    }
                }
            }

            let mut ctx = Contextualizer::new(DEFAULT_STOP_THRESHOLD_M);
            let tuples = clean.into_iter().map(|t| ctx.label(t)).collect();
            trajectories.push(Trajectory {
                vehicle_id,
                route_id: route.id.clone(),
                tuples,
            });
        }
    }

    Ok(GroundTruth {
        session: SessionWindow {
            start_ms: params.session_start_ms,
            end_ms: params.session_start_ms + duration_s as i64 * 1000,
        },
        cadence_s,
        trajectories,
        dwells,
        weights: network
            .stations
            .iter()
            .zip(&network.weights)
            .map(|(s, &w)| (s.id.clone(), w))
            .collect(),
    })
}

fn route_legs(network: &Network, stations: &[String]) -> Result<Vec<Leg>, ConfigError> {
    let idx = stations
        .iter()
        .map(|id| {
            network
                .station_index(id)
                .ok_or_else(|| ConfigError::new(format!("route references unknown station {id}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if idx.len() < 2 {
        return Err(ConfigError::new("route needs at least two stations"));
    }
    let pos = |i: usize| (network.stations[i].lat, network.stations[i].lon);
    Ok((0..idx.len())
        .map(|k| {
            let a = idx[k];
            let b = idx[(k + 1) % idx.len()];
            Leg {
                from: pos(a),
                to: pos(b),
                to_station: b,
                len: geo_distance(pos(a), pos(b)),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feed_model::MotionLabel;
    use crate::feedgen::network::{generate_network, NetworkSpec, Route, Station};

    /// One route with two stations `len_m` apart due north; never dwells.
    fn straight_network(len_m: f64, dwell_weight: f64) -> Network {
        let a = (46.0, -64.8);
        let b = offset_meters(a, len_m, 0.0);
        Network {
            stations: vec![
                Station {
                    id: "s1".into(),
                    lat: a.0,
                    lon: a.1,
                    routes: vec!["r1".into()],
                },
                Station {
                    id: "s2".into(),
                    lat: b.0,
                    lon: b.1,
                    routes: vec!["r1".into()],
                },
            ],
            routes: vec![Route {
                id: "r1".into(),
                number: "1".into(),
                stations: vec!["s1".into(), "s2".into()],
                headway_s: 600.0,
            }],
            weights: vec![0.0, dwell_weight],
        }
    }

    fn one_vehicle(speed: f64) -> TripParams {
        TripParams {
            speed_mps: speed,
            vehicles_per_route: 1,
            ..TripParams::default()
        }
    }

    #[test]
    fn tick_count_is_inclusive() {
        let net = generate_network(&NetworkSpec {
            routes: 3,
            stations: 12,
            ..NetworkSpec::default()
        })
        .unwrap();
        let truth = simulate_trips(&net, &TripParams::default(), 60, 5).unwrap();
        assert_eq!(truth.trajectories.len(), 6);
        for t in &truth.trajectories {
            assert_eq!(t.tuples.len(), 13);
            assert!(t.tuples.windows(2).all(|w| w[0].tuple.ts < w[1].tuple.ts));
        }
    }

    #[test]
    fn twenty_meter_steps_are_all_moves() {
        let truth = simulate_trips(&straight_network(10_000.0, 0.0), &one_vehicle(4.0), 600, 5).unwrap();
        let t = &truth.trajectories[0];
        assert_eq!(t.tuples.len(), 121);
        assert!(t.tuples.iter().all(|c| c.label == MotionLabel::Move));
        for c in &t.tuples[1..] {
            assert!((c.dist_prev_m.unwrap() - 20.0).abs() < 1e-6);
        }
    }

    #[test]
    fn three_tick_dwell_yields_three_stops_at_station() {
        let params = TripParams {
            max_dwell_ticks: 3,
            dwell_jitter_m: 2.0,
            ..one_vehicle(4.0)
        };
        // 1000 m at 20 m per tick reaches s2 exactly on tick 50.
        let mut truth;
        let mut seed = 0;
        loop {
            truth = simulate_trips(&straight_network(1000.0, 1.0), &TripParams { rng_seed: seed, ..params.clone() }, 400, 5)
                .unwrap();
            if truth.dwells.first().map(|d| d.ticks) == Some(3) {
                break;
            }
            seed += 1;
        }
        let d = &truth.dwells[0];
        assert_eq!(d.station_id, "s2");
        assert_eq!(d.duration_s, 15);
        let t = &truth.trajectories[0].tuples;
        let arrival = t.iter().position(|c| c.tuple.ts == d.arrival_ts).unwrap();
        assert_eq!(arrival, 50);
        let labels: Vec<MotionLabel> = t[arrival..arrival + 5].iter().map(|c| c.label).collect();
        use MotionLabel::*;
        assert_eq!(labels, vec![Move, Stop, Stop, Stop, Move]);
        let station = offset_meters((46.0, -64.8), 1000.0, 0.0);
        for c in &t[arrival..arrival + 4] {
            assert!(geo_distance((c.tuple.lat, c.tuple.lon), station) <= 2.0 + 1e-6);
        }
    }

    #[test]
    fn dwells_only_on_own_route() {
        let net = generate_network(&NetworkSpec {
            routes: 4,
            stations: 30,
            ..NetworkSpec::default()
        })
        .unwrap();
        let truth = simulate_trips(&net, &TripParams::default(), 3000, 5).unwrap();
        assert!(!truth.dwells.is_empty());
        for d in &truth.dwells {
            let route = &truth
                .trajectories
                .iter()
                .find(|t| t.vehicle_id == d.vehicle_id)
                .unwrap()
                .route_id;
            let station = net.station(&d.station_id).unwrap();
            assert!(station.routes.contains(route));
        }
    }

    #[test]
    fn deterministic() {
        let net = generate_network(&NetworkSpec {
            routes: 3,
            stations: 20,
            ..NetworkSpec::default()
        })
        .unwrap();
        let a = simulate_trips(&net, &TripParams::default(), 900, 5).unwrap();
        let b = simulate_trips(&net, &TripParams::default(), 900, 5).unwrap();
        assert_eq!(a.truth_text(), b.truth_text());
        assert_eq!(a.dwells_text(), b.dwells_text());
    }

    #[test]
    fn rejects_zero_cadence() {
        let net = straight_network(100.0, 0.0);
        assert!(simulate_trips(&net, &TripParams::default(), 60, 0).is_err());
        assert!(simulate_trips(&net, &TripParams::default(), 0, 5).is_err());
    }
}

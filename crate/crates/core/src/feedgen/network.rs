use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ConfigError;
use crate::fabric::geo_distance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&lat) && (self.min_lon..=self.max_lon).contains(&lon)
    }
}

impl Default for BoundingBox {
    /// Roughly the Greater Moncton area.
    fn default() -> Self {
        BoundingBox {
            min_lat: 46.05,
            min_lon: -64.90,
            max_lat: 46.15,
            max_lon: -64.70,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub routes: usize,
    pub stations: usize,
    pub bbox: BoundingBox,
    pub headway_s: f64,
    /// Number of high-traffic stations with planted transfer weights.
    pub hubs: usize,
    /// Weight ratio between consecutive planted ranks (and between the last hub and ordinary stations).
    pub hub_ratio: f64,
    /// How many routes each hub belongs to.
    pub hub_routes: usize,
    pub rng_seed: u64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            routes: 30,
            stations: 642,
            bbox: BoundingBox::default(),
            headway_s: 600.0,
            hubs: 3,
            hub_ratio: 3.0,
            hub_routes: 10,
            rng_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    /// Route ids this station belongs to, sorted.
    pub routes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub id: String,
    pub number: String,
    /// Station ids in travel order. Vehicles loop back to the first station.
    pub stations: Vec<String>,
    pub headway_s: f64,
}

/// Inclusive `[start_ms, end_ms]` interval a feed's timestamps must fall in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionWindow {
    pub start_ms: i64,
    pub end_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub stations: Vec<Station>,
    pub routes: Vec<Route>,
    /// Transfer-traffic weight per station, parallel to `stations`.
    pub weights: Vec<f64>,
}

impl Network {
    pub fn station(&self, id: &str) -> Option<&Station> {
        self.station_index(id).map(|i| &self.stations[i])
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.stations.binary_search_by(|s| s.id.as_str().cmp(id)).ok()
    }

    /// Stations ordered by planted weight, heaviest first; ties by id.
    pub fn planted_ranking(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.stations.len()).collect();
        idx.sort_by(|&a, &b| {
            self.weights[b]
                .total_cmp(&self.weights[a])
                .then_with(|| self.stations[a].id.cmp(&self.stations[b].id))
        });
        idx.into_iter().map(|i| self.stations[i].id.as_str()).collect()
    }
}

fn width(n: usize) -> usize {
    n.to_string().len().max(2)
}

/// Builds a deterministic random network. Every route gets at least two
/// distinct stations and every station belongs to at least one route.
pub fn generate_network(spec: &NetworkSpec) -> Result<Network, ConfigError> {
    if spec.routes == 0 || spec.stations == 0 {
        return Err(ConfigError::new("routes and stations must be at least 1"));
    }
    if spec.stations < spec.routes * 2 {
        return Err(ConfigError::new(format!(
            "{} stations cannot give each of {} routes two stations",
            spec.stations, spec.routes
        )));
    }
    let b = spec.bbox;
    if !(b.min_lat < b.max_lat && b.min_lon < b.max_lon) {
        return Err(ConfigError::new("bounding box is empty"));
    }
    if spec.hubs > spec.stations {
        return Err(ConfigError::new("more hubs than stations"));
    }
    if spec.hub_ratio < 1.0 || spec.headway_s <= 0.0 {
        return Err(ConfigError::new("hub_ratio must be >= 1 and headway positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let sw = width(spec.stations);
    let rw = width(spec.routes);
    let coords: Vec<(f64, f64)> = (0..spec.stations)
        .map(|_| (rng.gen_range(b.min_lat..b.max_lat), rng.gen_range(b.min_lon..b.max_lon)))
        .collect();

    let mut perm: Vec<usize> = (0..spec.stations).collect();
    perm.shuffle(&mut rng);
    let mut members: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); spec.routes];
    for r in 0..spec.routes {
        members[r].insert(perm[2 * r]);
        members[r].insert(perm[2 * r + 1]);
    }
    for (k, &s) in perm[2 * spec.routes..].iter().enumerate() {
        members[k % spec.routes].insert(s);
    }

    // Hubs are taken from the round-robin tail when possible so that the
    // two-station minimum of each route is not made of hubs only.
    let hub_pool: Vec<usize> = perm.iter().rev().copied().take(spec.hubs).collect();
    let mut weights = vec![1.0; spec.stations];
    let hub_routes = spec.hub_routes.clamp(1, spec.routes);
    for (rank, &h) in hub_pool.iter().enumerate() {
        weights[h] = spec.hub_ratio.powi((spec.hubs - rank) as i32);
        let mut rs: Vec<usize> = (0..spec.routes).collect();
        rs.shuffle(&mut rng);
        let already = members.iter().filter(|m| m.contains(&h)).count();
        let mut need = hub_routes.saturating_sub(already);
        for r in rs {
            if need == 0 {
                break;
            }
            if members[r].insert(h) {
                need -= 1;
            }
        }
    }

    let station_id = |i: usize| format!("s{:0sw$}", i + 1);
    let mut routes = Vec::with_capacity(spec.routes);
    for (r, set) in members.iter().enumerate() {
        let order = nearest_neighbour_order(set, &coords);
        routes.push(Route {
            id: format!("r{:0rw$}", r + 1),
            number: (r + 1).to_string(),
            stations: order.into_iter().map(station_id).collect(),
            headway_s: spec.headway_s,
        });
    }

    let stations = coords
        .iter()
        .enumerate()
        .map(|(i, &(lat, lon))| Station {
            id: station_id(i),
            lat,
            lon,
            routes: members
                .iter()
                .enumerate()
                .filter(|(_, m)| m.contains(&i))
                .map(|(r, _)| routes[r].id.clone())
                .collect(),
        })
        .collect();

    Ok(Network {
        stations,
        routes,
        weights,
    })
}

/// Greedy tour starting at the southernmost member.
fn nearest_neighbour_order(set: &BTreeSet<usize>, coords: &[(f64, f64)]) -> Vec<usize> {
    let mut left: Vec<usize> = set.iter().copied().collect();
    let start = left
        .iter()
        .copied()
        .min_by(|&a, &b| coords[a].0.total_cmp(&coords[b].0).then(a.cmp(&b)))
        .expect("route has stations");
    left.retain(|&s| s != start);
    let mut order = vec![start];
    let mut cur = start;
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                geo_distance(coords[cur], coords[a])
                    .total_cmp(&geo_distance(coords[cur], coords[b]))
                    .then(a.cmp(&b))
            })
            .expect("non-empty");
        cur = left.swap_remove(pos);
        order.push(cur);
    }
    order
}

/// `network.txt`: one `id,lat,lon,routes` line per station (routes `;`-joined),
/// preceded by `#route` and `#session` directive comments.
pub fn write_network(net: &Network, session: Option<SessionWindow>) -> String {
    let mut out = String::from("# station_id,lat,lon,routes\n");
    if let Some(s) = session {
        let _ = writeln!(out, "#session {} {}", s.start_ms, s.end_ms);
    }
    for r in &net.routes {
        let _ = writeln!(out, "#route {} {} {} {}", r.id, r.number, r.headway_s, r.stations.join(";"));
    }
    for s in &net.stations {
        let _ = writeln!(out, "{},{},{},{}", s.id, s.lat, s.lon, s.routes.join(";"));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFile {
    pub network: Network,
    pub session: Option<SessionWindow>,
}

pub fn parse_network(text: &str) -> Result<NetworkFile, ConfigError> {
    let mut stations = Vec::new();
    let mut routes = Vec::new();
    let mut session = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        let bad = |what: &str| ConfigError::new(format!("network line {}: {what}", n + 1));
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#session ") {
            let mut it = rest.split_whitespace().map(str::parse::<i64>);
            match (it.next(), it.next()) {
                (Some(Ok(start_ms)), Some(Ok(end_ms))) => session = Some(SessionWindow { start_ms, end_ms }),
                _ => return Err(bad("malformed #session")),
            }
        } else if let Some(rest) = line.strip_prefix("#route ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(bad("malformed #route"));
            }
            routes.push(Route {
                id: parts[0].to_string(),
                number: parts[1].to_string(),
                headway_s: parts[2].parse().map_err(|_| bad("bad headway"))?,
                stations: parts[3].split(';').map(str::to_string).collect(),
            });
        } else if line.starts_with('#') {
            continue;
        } else {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            stations.push(Station {
                id: cols[0].to_string(),
                lat: cols[1].parse().map_err(|_| bad("bad lat"))?,
                lon: cols[2].parse().map_err(|_| bad("bad lon"))?,
                routes: cols[3].split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
            });
        }
    }
    stations.sort_by(|a, b| a.id.cmp(&b.id));
    if stations.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(ConfigError::new("duplicate station id in network"));
    }
    let weights = vec![1.0; stations.len()];
    Ok(NetworkFile {
        network: Network {
            stations,
            routes,
            weights,
        },
        session,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(routes: usize, stations: usize, seed: u64) -> NetworkSpec {
        NetworkSpec {
            routes,
            stations,
            rng_seed: seed,
            ..NetworkSpec::default()
        }
    }

    #[test]
    fn default_shape() {
        let net = generate_network(&spec(30, 642, 7)).unwrap();
        assert_eq!(net.routes.len(), 30);
        assert_eq!(net.stations.len(), 642);
        for s in &net.stations {
            assert!(!s.routes.is_empty(), "{} has no route", s.id);
            assert!(BoundingBox::default().contains(s.lat, s.lon));
        }
        for r in &net.routes {
            let distinct: BTreeSet<_> = r.stations.iter().collect();
            assert!(distinct.len() >= 2);
            assert_eq!(distinct.len(), r.stations.len());
        }
    }

    #[test]
    fn minimal_network() {
        let net = generate_network(&NetworkSpec {
            hubs: 1,
            ..spec(1, 2, 0)
        })
        .unwrap();
        assert_eq!(net.routes.len(), 1);
        assert_eq!(net.routes[0].stations.len(), 2);
    }

    #[test]
    fn too_few_stations_is_config_error() {
        assert!(generate_network(&spec(2, 3, 0)).is_err());
    }

    #[test]
    fn same_seed_same_network() {
        assert_eq!(
            generate_network(&spec(5, 40, 3)).unwrap(),
            generate_network(&spec(5, 40, 3)).unwrap()
        );
        assert_ne!(
            generate_network(&spec(5, 40, 3)).unwrap(),
            generate_network(&spec(5, 40, 4)).unwrap()
        );
    }

    #[test]
    fn planted_hubs_are_heaviest() {
        let net = generate_network(&spec(12, 100, 1)).unwrap();
        let ranking = net.planted_ranking();
        let w: Vec<f64> = ranking[..4]
            .iter()
            .map(|id| net.weights[net.station_index(id).unwrap()])
            .collect();
        assert_eq!(w, vec![27.0, 9.0, 3.0, 1.0]);
        let hub = net.station(ranking[0]).unwrap();
        assert_eq!(hub.routes.len(), 10);
    }

    #[test]
    fn network_file_round_trip() {
        let net = generate_network(&spec(4, 20, 9)).unwrap();
        let session = SessionWindow {
            start_ms: 10,
            end_ms: 20,
        };
        let parsed = parse_network(&write_network(&net, Some(session))).unwrap();
        assert_eq!(parsed.session, Some(session));
        assert_eq!(parsed.network.stations, net.stations);
        assert_eq!(parsed.network.routes, net.routes);
    }
}

//! Network travel times and conversion of scheduled visits into staypoints.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::domain::{AgentId, PoiId, SimClock, Staypoint, Timestamp, MIN_STAY_SECONDS};
use crate::geo::{haversine_km, GridIndex, LatLon};
use crate::world::{PoiCatalog, RoadGraph};

/// Added at each end of a trip for parking and walking.
pub const DEFAULT_PADDING_S: f64 = 60.0;
/// Speed used when no network path exists.
pub const FALLBACK_SPEED_MPS: f64 = 8.33;
/// Graphs up to this size cache whole single-source rows.
pub const ROW_CACHE_MAX_NODES: usize = 4_096;

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("no network path from node {from} to node {to}")]
    Unreachable { from: u32, to: u32 },
    #[error("node {0} is not in the graph")]
    UnknownNode(u32),
}

#[derive(Clone, Copy, PartialEq)]
struct QueueItem {
    cost: f64,
    node: u32,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Travel seconds from `source` to every node, `INFINITY` where unreachable.
/// Stops early once `target` is settled.
pub fn dijkstra(graph: &RoadGraph, source: u32, target: Option<u32>) -> Vec<f64> {
    let n = graph.n_nodes();
    let mut dist = vec![f64::INFINITY; n];
    if source as usize >= n {
        return dist;
    }
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source as usize] = 0.0;
    heap.push(QueueItem { cost: 0.0, node: source });
    while let Some(QueueItem { cost, node }) = heap.pop() {
        if settled[node as usize] {
            continue;
        }
        settled[node as usize] = true;
        if Some(node) == target {
            break;
        }
        for e in graph.out_edges(node) {
            let next = cost + e.travel_seconds();
            if next < dist[e.to as usize] {
                dist[e.to as usize] = next;
                heap.push(QueueItem { cost: next, node: e.to });
            }
        }
    }
    dist
}

/// Shortest-path travel times between coordinates, snapped to the nearest node.
pub struct TravelTimeOracle {
    graph: Arc<RoadGraph>,
    nodes: GridIndex<u32>,
    padding_s: f64,
    rows: Option<Vec<OnceLock<Arc<[f64]>>>>,
    pairs: DashMap<(u32, u32), f64>,
}

impl TravelTimeOracle {
    pub fn new(graph: Arc<RoadGraph>) -> Self {
        let nodes = GridIndex::build(0.01, graph.coords().iter().enumerate().map(|(i, c)| (*c, i as u32)));
        let rows = (graph.n_nodes() <= ROW_CACHE_MAX_NODES)
            .then(|| (0..graph.n_nodes()).map(|_| OnceLock::new()).collect());
        Self { graph, nodes, padding_s: DEFAULT_PADDING_S, rows, pairs: DashMap::new() }
    }

    pub fn with_padding(mut self, padding_s: f64) -> Self {
        self.padding_s = padding_s;
        self
    }

    pub fn padding_s(&self) -> f64 {
        self.padding_s
    }

    pub fn graph(&self) -> &RoadGraph {
        &self.graph
    }

    /// Nearest graph node to `p`.
    pub fn snap(&self, p: LatLon) -> u32 {
        self.nodes.nearest(p).map(|(n, _)| n).expect("graph has at least one node")
    }

    /// Network seconds from `from` to every node. Cached for small graphs.
    pub fn times_from(&self, from: u32) -> Arc<[f64]> {
        match &self.rows {
            Some(rows) => rows[from as usize].get_or_init(|| dijkstra(&self.graph, from, None).into()).clone(),
            None => dijkstra(&self.graph, from, None).into(),
        }
    }

    /// Network seconds between two nodes, without padding.
    pub fn network_seconds(&self, from: u32, to: u32) -> Result<f64, RoutingError> {
        let n = self.graph.n_nodes() as u32;
        for node in [from, to] {
            if node >= n {
                return Err(RoutingError::UnknownNode(node));
            }
        }
        let t = match &self.rows {
            Some(_) => self.times_from(from)[to as usize],
            None => {
                if let Some(t) = self.pairs.get(&(from, to)) {
                    *t
                } else {
                    let t = dijkstra(&self.graph, from, Some(to))[to as usize];
                    self.pairs.insert((from, to), t);
                    t
                }
            }
        };
        if t.is_finite() {
            Ok(t)
        } else {
            Err(RoutingError::Unreachable { from, to })
        }
    }

    /// Door-to-door seconds: padding at both ends plus the network time
    /// between the nodes nearest to `origin` and `destination`.
    pub fn shortest_travel_time(&self, origin: LatLon, destination: LatLon) -> Result<f64, RoutingError> {
        let t = self.network_seconds(self.snap(origin), self.snap(destination))?;
        Ok(t + 2.0 * self.padding_s)
    }

    /// Like [`Self::shortest_travel_time`], falling back to a straight line at
    /// [`FALLBACK_SPEED_MPS`] when the network has no path. The flag reports
    /// whether the fallback was used.
    pub fn travel_time_or_fallback(&self, origin: LatLon, destination: LatLon) -> (f64, bool) {
        match self.shortest_travel_time(origin, destination) {
            Ok(t) => (t, false),
            Err(_) => {
                let straight = haversine_km(origin, destination) * 1000.0 / FALLBACK_SPEED_MPS;
                (straight + 2.0 * self.padding_s, true)
            }
        }
    }
}

/// Travel times between catalog POIs, with each POI's node precomputed.
pub struct PoiRouter<'a> {
    oracle: &'a TravelTimeOracle,
    catalog: &'a PoiCatalog,
    nodes: HashMap<PoiId, u32>,
}

impl<'a> PoiRouter<'a> {
    pub fn new(oracle: &'a TravelTimeOracle, catalog: &'a PoiCatalog) -> Self {
        let nodes = catalog.records().iter().map(|p| (p.poi_id, oracle.snap(p.location()))).collect();
        Self { oracle, catalog, nodes }
    }

    pub fn oracle(&self) -> &TravelTimeOracle {
        self.oracle
    }

    pub fn catalog(&self) -> &PoiCatalog {
        self.catalog
    }

    pub fn node_of(&self, poi: PoiId) -> u32 {
        self.nodes[&poi]
    }

    /// Door-to-door seconds between two POIs and whether the straight-line
    /// fallback was needed.
    pub fn travel_seconds(&self, from: PoiId, to: PoiId) -> (f64, bool) {
        let pad = 2.0 * self.oracle.padding_s();
        match self.oracle.network_seconds(self.node_of(from), self.node_of(to)) {
            Ok(t) => (t + pad, false),
            Err(_) => {
                let d = haversine_km(self.catalog.location(from), self.catalog.location(to));
                (d * 1000.0 / FALLBACK_SPEED_MPS + pad, true)
            }
        }
    }

    /// Travel time rounded up to whole seconds.
    pub fn travel_whole_seconds(&self, from: PoiId, to: PoiId) -> (i64, bool) {
        let (t, fallback) = self.travel_seconds(from, to);
        (t.ceil() as i64, fallback)
    }
}

/// A stay at a POI as planned, before travel is accounted for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScheduledVisit {
    pub poi_id: PoiId,
    pub start: Timestamp,
    pub end: Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealizeConfig {
    /// Standard deviation of the departure offset from the scheduled end, seconds.
    pub departure_jitter_s: f64,
}

impl Default for RealizeConfig {
    fn default() -> Self {
        Self { departure_jitter_s: 90.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Realized {
    pub staypoints: Vec<Staypoint>,
    /// Legs that used the straight-line fallback.
    pub fallbacks: usize,
    /// Visits cut to the minimum stay because the agent arrived too late.
    pub shortened: usize,
}

/// Merges consecutive visits to the same POI into one block.
pub fn merge_consecutive(visits: &[ScheduledVisit]) -> Vec<ScheduledVisit> {
    let mut out: Vec<ScheduledVisit> = Vec::with_capacity(visits.len());
    for v in visits {
        match out.last_mut() {
            Some(last) if last.poi_id == v.poi_id => last.end = last.end.max(v.end),
            _ => out.push(*v),
        }
    }
    out
}

/// Turns a planned visit sequence into staypoints that respect travel times.
///
/// A visit starts at the later of its scheduled start and the arrival time.
/// If the agent arrives at or after the scheduled end, the visit lasts the
/// minimum stay. Staypoints that would start after the window are dropped.
pub fn realize_schedule<R: Rng>(
    agent_id: AgentId,
    visits: &[ScheduledVisit],
    router: &PoiRouter<'_>,
    clock: &SimClock,
    cfg: &RealizeConfig,
    rng: &mut R,
) -> Realized {
    let blocks = merge_consecutive(visits);
    let jitter = (cfg.departure_jitter_s > 0.0).then(|| Normal::new(0.0, cfg.departure_jitter_s).expect("positive sd"));
    let mut out = Realized::default();
    let mut prev: Option<(PoiId, Timestamp)> = None;
    for (k, b) in blocks.iter().enumerate() {
        let mut start = b.start;
        let mut shortened = false;
        if let Some((from, departed)) = prev {
            let (tt, fallback) = router.travel_whole_seconds(from, b.poi_id);
            out.fallbacks += fallback as usize;
            let arrival = departed.plus(tt);
            if arrival >= b.end {
                shortened = true;
            }
            start = start.max(arrival);
        }
        if start >= clock.window_last() {
            break;
        }
        let mut end = if shortened { start.plus(MIN_STAY_SECONDS) } else { b.end };
        if k + 1 < blocks.len() && !shortened {
            if let Some(j) = &jitter {
                end = end.plus(j.sample(rng).round() as i64);
            }
        }
        end = end.max(start.plus(MIN_STAY_SECONDS));
        out.shortened += shortened as usize;
        out.staypoints.push(Staypoint::new(agent_id, b.poi_id, start, end));
        prev = Some((b.poi_id, end));
    }
    out
}

/// Staypoint pairs whose gap is shorter than the network travel time; the
/// returned indices point at the later staypoint.
pub fn feasibility_violations(seq: &[Staypoint], router: &PoiRouter<'_>) -> Vec<usize> {
    seq.windows(2)
        .enumerate()
        .filter(|(_, w)| {
            if w[0].poi_id == w[1].poi_id {
                return w[1].start < w[0].end;
            }
            let (tt, _) = router.travel_whole_seconds(w[0].poi_id, w[1].poi_id);
            w[1].start.0 - w[0].end.0 < tt
        })
        .map(|(i, _)| i + 1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ActivitySet, ActivityType, PoiRecord};
    use crate::world::{generate_grid_graph, GridConfig, RawEdge};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_graph(length_m: f64, speed: f64) -> RoadGraph {
        let a = LatLon::new(34.0, -118.0);
        let b = a.offset_km(0.0, 1.0);
        let edge = |u, v, at_u, at_v| RawEdge { u, v, at_u, at_v, length_m, speed_mps: speed };
        RoadGraph::from_raw_edges(&[edge(0, 1, a, b), edge(1, 0, b, a)]).unwrap()
    }

    #[test]
    fn same_point_costs_only_padding() {
        let oracle = TravelTimeOracle::new(Arc::new(line_graph(1000.0, 10.0)));
        let p = LatLon::new(34.0, -118.0);
        assert_eq!(oracle.shortest_travel_time(p, p).unwrap(), 120.0);
    }

    #[test]
    fn one_kilometre_at_ten_mps() {
        let oracle = TravelTimeOracle::new(Arc::new(line_graph(1000.0, 10.0)));
        let a = LatLon::new(34.0, -118.0);
        let b = a.offset_km(0.0, 1.0);
        assert_eq!(oracle.shortest_travel_time(a, b).unwrap(), 220.0);
    }

    #[test]
    fn grid_corner_to_corner_matches_manhattan_time() {
        let cfg = GridConfig { rows: 10, cols: 10, arterial_every: 0, spacing_m: 500.0, speed_mps: 10.0, ..Default::default() };
        let g = generate_grid_graph(&cfg).unwrap();
        let oracle = TravelTimeOracle::new(Arc::new(g));
        let t = oracle.network_seconds(0, 99).unwrap();
        assert!((t - 18.0 * 50.0).abs() < 1e-9);
    }

    fn catalog_two(a: LatLon, b: LatLon) -> PoiCatalog {
        let rec = |id, at: LatLon, t| PoiRecord {
            poi_id: id,
            name: String::new(),
            latitude: at.lat,
            longitude: at.lon,
            act_types: ActivitySet::of(&[t]),
        };
        PoiCatalog::from_records(vec![rec(1, a, ActivityType::Home), rec(2, b, ActivityType::Work)]).unwrap()
    }

    #[test]
    fn late_arrival_pushes_start_and_on_time_keeps_schedule() {
        // 1380 s of driving plus two minutes of padding is a 25 minute trip.
        let g = line_graph(13_800.0, 10.0);
        let a = g.coord(0);
        let b = g.coord(1);
        let oracle = TravelTimeOracle::new(Arc::new(g));
        let catalog = catalog_two(a, b);
        let router = PoiRouter::new(&oracle, &catalog);
        let clock = SimClock::default();
        let d = |h, m| Timestamp::local(2024, 1, 1, h, m, 0);
        let cfg = RealizeConfig { departure_jitter_s: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let on_time = [
            ScheduledVisit { poi_id: 1, start: d(0, 0), end: d(8, 30) },
            ScheduledVisit { poi_id: 2, start: d(9, 0), end: d(17, 0) },
        ];
        let r = realize_schedule(7, &on_time, &router, &clock, &cfg, &mut rng);
        assert_eq!(r.staypoints[1].start, d(9, 0));

        let late = [
            ScheduledVisit { poi_id: 1, start: d(0, 0), end: d(8, 50) },
            ScheduledVisit { poi_id: 2, start: d(9, 0), end: d(17, 0) },
        ];
        let r = realize_schedule(7, &late, &router, &clock, &cfg, &mut rng);
        assert_eq!(r.staypoints[1].start, d(9, 15));

        let too_late = [
            ScheduledVisit { poi_id: 1, start: d(0, 0), end: d(8, 50) },
            ScheduledVisit { poi_id: 2, start: d(9, 0), end: d(9, 10) },
        ];
        let r = realize_schedule(7, &too_late, &router, &clock, &cfg, &mut rng);
        assert_eq!(r.staypoints[1].start, d(9, 15));
        assert_eq!(r.staypoints[1].end, d(9, 20));
        assert_eq!(r.shortened, 1);
        assert!(feasibility_violations(&r.staypoints, &router).is_empty());
    }

    #[test]
    fn consecutive_same_poi_blocks_merge() {
        let d = |day, h| Timestamp::local(2024, 1, day, h, 0, 0);
        let merged = merge_consecutive(&[
            ScheduledVisit { poi_id: 1, start: d(1, 18), end: d(2, 0) },
            ScheduledVisit { poi_id: 1, start: d(2, 0), end: d(2, 8) },
            ScheduledVisit { poi_id: 2, start: d(2, 9), end: d(2, 17) },
        ]);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].end, d(2, 8));
    }

    #[test]
    fn disconnected_pair_falls_back_to_straight_line() {
        // Two one-way edges leave node 1 unable to return to node 0.
        let a = LatLon::new(34.0, -118.0);
        let b = a.offset_km(0.0, 1.0);
        let g = RoadGraph::from_raw_edges(&[RawEdge { u: 0, v: 1, at_u: a, at_v: b, length_m: 1000.0, speed_mps: 10.0 }])
            .unwrap();
        let oracle = TravelTimeOracle::new(Arc::new(g));
        assert!(matches!(oracle.shortest_travel_time(b, a), Err(RoutingError::Unreachable { .. })));
        let (t, fallback) = oracle.travel_time_or_fallback(b, a);
        assert!(fallback);
        assert!((t - (haversine_km(a, b) * 1000.0 / FALLBACK_SPEED_MPS + 120.0)).abs() < 1e-9);
    }
}

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::geo::{BoundingBox, LatLon};

/// Column header of the edge-list file.
pub const EDGE_LIST_HEADER: [&str; 8] = ["u", "v", "lat_u", "lon_u", "lat_v", "lon_v", "length_m", "speed_mps"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoadEdge {
    pub from: u32,
    pub to: u32,
    pub length_m: f64,
    pub speed_mps: f64,
}

impl RoadEdge {
    pub fn travel_seconds(&self) -> f64 {
        self.length_m / self.speed_mps
    }
}

/// Directed road graph in compressed adjacency form.
///
/// Nodes are dense `u32` indices; `node_ids` keeps the external id each one
/// was loaded with.
#[derive(Clone, Debug)]
pub struct RoadGraph {
    node_ids: Vec<u64>,
    coords: Vec<LatLon>,
    offsets: Vec<usize>,
    edges: Vec<RoadEdge>,
}

/// One row of an edge list, before component extraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawEdge {
    pub u: u64,
    pub v: u64,
    pub at_u: LatLon,
    pub at_v: LatLon,
    pub length_m: f64,
    pub speed_mps: f64,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl RoadGraph {
    /// Builds the graph and keeps only its largest weakly connected component.
    pub fn from_raw_edges(raw: &[RawEdge]) -> Result<Self, WorldError> {
        if raw.is_empty() {
            return Err(WorldError::EmptyGraph);
        }
        let mut ids: Vec<u64> = Vec::new();
        let mut coords: Vec<LatLon> = Vec::new();
        let mut lookup: HashMap<u64, usize> = HashMap::new();
        let mut intern = |id: u64, at: LatLon| {
            *lookup.entry(id).or_insert_with(|| {
                ids.push(id);
                coords.push(at);
                ids.len() - 1
            })
        };
        let dense: Vec<(usize, usize, f64, f64)> =
            raw.iter().map(|e| (intern(e.u, e.at_u), intern(e.v, e.at_v), e.length_m, e.speed_mps)).collect();

        let mut parent: Vec<usize> = (0..ids.len()).collect();
        for &(a, b, ..) in &dense {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for n in 0..ids.len() {
            *sizes.entry(find(&mut parent, n)).or_default() += 1;
        }
        let largest = sizes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(root, _)| *root)
            .ok_or(WorldError::EmptyGraph)?;

        let mut remap = vec![u32::MAX; ids.len()];
        let mut node_ids = Vec::new();
        let mut kept_coords = Vec::new();
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by_key(|&n| ids[n]);
        for n in order {
            if find(&mut parent, n) == largest {
                remap[n] = node_ids.len() as u32;
                node_ids.push(ids[n]);
                kept_coords.push(coords[n]);
            }
        }
        let mut edges: Vec<RoadEdge> = dense
            .iter()
            .filter(|(a, ..)| remap[*a] != u32::MAX)
            .map(|&(a, b, length_m, speed_mps)| RoadEdge { from: remap[a], to: remap[b], length_m, speed_mps })
            .collect();
        edges.sort_by_key(|e| (e.from, e.to));
        let mut offsets = vec![0usize; node_ids.len() + 1];
        for e in &edges {
            offsets[e.from as usize + 1] += 1;
        }
        for i in 0..node_ids.len() {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self { node_ids, coords: kept_coords, offsets, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_id(&self, node: u32) -> u64 {
        self.node_ids[node as usize]
    }

    pub fn coord(&self, node: u32) -> LatLon {
        self.coords[node as usize]
    }

    pub fn coords(&self) -> &[LatLon] {
        &self.coords
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn out_edges(&self, node: u32) -> &[RoadEdge] {
        &self.edges[self.offsets[node as usize]..self.offsets[node as usize + 1]]
    }

    pub fn bounding_box(&self) -> BoundingBox {
        self.coords.iter().fold(
            BoundingBox {
                min_lat: f64::INFINITY,
                max_lat: f64::NEG_INFINITY,
                min_lon: f64::INFINITY,
                max_lon: f64::NEG_INFINITY,
            },
            |b, p| BoundingBox {
                min_lat: b.min_lat.min(p.lat),
                max_lat: b.max_lat.max(p.lat),
                min_lon: b.min_lon.min(p.lon),
                max_lon: b.max_lon.max(p.lon),
            },
        )
    }

    /// Writes the graph in the edge-list format read by [`parse_edge_list`].
    pub fn write_edge_list<W: Write>(&self, out: W) -> Result<(), WorldError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(EDGE_LIST_HEADER)?;
        for e in &self.edges {
            let (a, b) = (self.coord(e.from), self.coord(e.to));
            w.write_record(&[
                self.node_id(e.from).to_string(),
                self.node_id(e.to).to_string(),
                a.lat.to_string(),
                a.lon.to_string(),
                b.lat.to_string(),
                b.lon.to_string(),
                e.length_m.to_string(),
                e.speed_mps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses an edge list with columns `u,v,lat_u,lon_u,lat_v,lon_v,length_m,speed_mps`.
pub fn parse_edge_list<R: Read>(input: R) -> Result<RoadGraph, WorldError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != EDGE_LIST_HEADER {
        return Err(WorldError::Parse { line: 1, message: format!("expected header {}", EDGE_LIST_HEADER.join(",")) });
    }
    let mut raw = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| WorldError::Parse { line, message };
        if record.len() != EDGE_LIST_HEADER.len() {
            return Err(bad(format!("expected 8 fields, found {}", record.len())));
        }
        let int = |i: usize| record[i].parse::<u64>().map_err(|e| bad(format!("{}: {e}", EDGE_LIST_HEADER[i])));
        let num = |i: usize| match record[i].parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(bad(format!("{}: not finite", EDGE_LIST_HEADER[i]))),
            Err(e) => Err(bad(format!("{}: {e}", EDGE_LIST_HEADER[i]))),
        };
        let edge = RawEdge {
            u: int(0)?,
            v: int(1)?,
            at_u: LatLon::new(num(2)?, num(3)?),
            at_v: LatLon::new(num(4)?, num(5)?),
            length_m: num(6)?,
            speed_mps: num(7)?,
        };
        if edge.length_m <= 0.0 {
            return Err(bad(format!("length_m must be positive, got {}", edge.length_m)));
        }
        if edge.speed_mps <= 0.0 {
            return Err(bad(format!("speed_mps must be positive, got {}", edge.speed_mps)));
        }
        if !edge.at_u.is_valid() || !edge.at_v.is_valid() {
            return Err(bad("coordinates out of range".into()));
        }
        raw.push(edge);
    }
    RoadGraph::from_raw_edges(&raw)
}

pub fn load_road_graph(path: &Path) -> Result<RoadGraph, WorldError> {
    let file = std::fs::File::open(path).map_err(|e| WorldError::Io(format!("{}: {e}", path.display())))?;
    parse_edge_list(std::io::BufReader::new(file))
}

/// Synthetic street grid with optional faster arterials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// South-west corner.
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    pub speed_mps: f64,
    /// Every n-th row and column is an arterial; 0 disables arterials.
    pub arterial_every: usize,
    pub arterial_speed_mps: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            origin_lat: 33.80,
            origin_lon: -118.55,
            rows: 41,
            cols: 41,
            spacing_m: 1_200.0,
            speed_mps: 11.2,
            arterial_every: 5,
            arterial_speed_mps: 17.9,
        }
    }
}

impl GridConfig {
    fn node_at(&self, r: usize, c: usize) -> LatLon {
        let origin = LatLon::new(self.origin_lat, self.origin_lon);
        origin.offset_km(r as f64 * self.spacing_m / 1000.0, c as f64 * self.spacing_m / 1000.0)
    }

    /// Area covered by the grid's nodes.
    pub fn bbox(&self) -> BoundingBox {
        let ne = self.node_at(self.rows.saturating_sub(1), self.cols.saturating_sub(1));
        BoundingBox { min_lat: self.origin_lat, max_lat: ne.lat, min_lon: self.origin_lon, max_lon: ne.lon }
    }
}

/// Grid with both directions of every horizontal and vertical street segment.
pub fn generate_grid_graph(cfg: &GridConfig) -> Result<RoadGraph, WorldError> {
    if cfg.rows == 0 || cfg.cols == 0 || cfg.rows * cfg.cols < 2 {
        return Err(WorldError::EmptyGraph);
    }
    if cfg.spacing_m <= 0.0 || cfg.speed_mps <= 0.0 || (cfg.arterial_every > 0 && cfg.arterial_speed_mps <= 0.0) {
        return Err(WorldError::Config("grid spacing and speeds must be positive".into()));
    }
    let id = |r: usize, c: usize| (r * cfg.cols + c) as u64;
    let arterial = |line: usize| cfg.arterial_every > 0 && line % cfg.arterial_every == 0;
    let mut raw = Vec::with_capacity(4 * cfg.rows * cfg.cols);
    let mut link = |a: (usize, usize), b: (usize, usize), speed: f64| {
        for (x, y) in [(a, b), (b, a)] {
            raw.push(RawEdge {
                u: id(x.0, x.1),
                v: id(y.0, y.1),
                at_u: cfg.node_at(x.0, x.1),
                at_v: cfg.node_at(y.0, y.1),
                length_m: cfg.spacing_m,
                speed_mps: speed,
            });
        }
    };
    for r in 0..cfg.rows {
        for c in 0..cfg.cols {
            if c + 1 < cfg.cols {
                let speed = if arterial(r) { cfg.arterial_speed_mps } else { cfg.speed_mps };
                link((r, c), (r, c + 1), speed);
            }
            if r + 1 < cfg.rows {
                let speed = if arterial(c) { cfg.arterial_speed_mps } else { cfg.speed_mps };
                link((r, c), (r + 1, c), speed);
            }
        }
    }
    RoadGraph::from_raw_edges(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts grid adjacencies one node at a time, independent of the generator loop.
    fn brute_force_directed_edges(rows: usize, cols: usize) -> usize {
        let mut n = 0;
        for r in 0..rows as i64 {
            for c in 0..cols as i64 {
                for (dr, dc) in [(0, 1), (0, -1), (1, 0), (-1, 0)] {
                    let (rr, cc) = (r + dr, c + dc);
                    if (0..rows as i64).contains(&rr) && (0..cols as i64).contains(&cc) {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    #[test]
    fn ten_by_ten_grid_counts() {
        let cfg = GridConfig { rows: 10, cols: 10, spacing_m: 500.0, speed_mps: 13.9, arterial_every: 0, ..Default::default() };
        let g = generate_grid_graph(&cfg).unwrap();
        assert_eq!(g.n_nodes(), 100);
        assert_eq!(brute_force_directed_edges(10, 10), 360);
        assert_eq!(g.n_edges(), 360);
        assert!(g.edges().iter().all(|e| e.length_m == 500.0 && e.speed_mps == 13.9));
    }

    #[test]
    fn smallest_edge_list() {
        let text = "u,v,lat_u,lon_u,lat_v,lon_v,length_m,speed_mps\n1,2,34.0,-118.0,34.01,-118.0,1000,10\n";
        let g = parse_edge_list(text.as_bytes()).unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.out_edges(0)[0].travel_seconds(), 100.0);
    }

    #[test]
    fn negative_length_is_a_parse_error_with_line() {
        let text = "u,v,lat_u,lon_u,lat_v,lon_v,length_m,speed_mps\n1,2,34.0,-118.0,34.01,-118.0,1000,10\n2,3,34.01,-118.0,34.02,-118.0,-5,10\n";
        match parse_edge_list(text.as_bytes()) {
            Err(WorldError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let garbage = "u,v,lat_u,lon_u,lat_v,lon_v,length_m,speed_mps\n1,x,34.0,-118.0,34.01,-118.0,1000,10\n";
        assert!(matches!(parse_edge_list(garbage.as_bytes()), Err(WorldError::Parse { line: 2, .. })));
        let empty = "u,v,lat_u,lon_u,lat_v,lon_v,length_m,speed_mps\n";
        assert_eq!(parse_edge_list(empty.as_bytes()).unwrap_err(), WorldError::EmptyGraph);
    }

    #[test]
    fn keeps_largest_component_only() {
        let text = "u,v,lat_u,lon_u,lat_v,lon_v,length_m,speed_mps\n\
            1,2,34.0,-118.0,34.01,-118.0,1000,10\n\
            2,3,34.01,-118.0,34.02,-118.0,1000,10\n\
            8,9,35.0,-118.0,35.01,-118.0,1000,10\n";
        let g = parse_edge_list(text.as_bytes()).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.n_edges(), 2);
    }

    #[test]
    fn edge_list_round_trip() {
        let cfg = GridConfig { rows: 3, cols: 4, ..Default::default() };
        let g = generate_grid_graph(&cfg).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = parse_edge_list(buf.as_slice()).unwrap();
        assert_eq!(back.n_nodes(), g.n_nodes());
        assert_eq!(back.edges(), g.edges());
    }
}

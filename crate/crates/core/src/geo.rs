//! Great-circle helpers and a uniform lat/lon bucket index.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

const KM_PER_DEG_LAT: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }

    /// Point displaced by the given kilometres north and east (local flat approximation).
    pub fn offset_km(&self, north_km: f64, east_km: f64) -> LatLon {
        let lat = self.lat + north_km / KM_PER_DEG_LAT;
        let lon = self.lon + east_km / (KM_PER_DEG_LAT * self.lat.to_radians().cos());
        LatLon { lat, lon }
    }
}

/// Haversine distance in kilometres.
pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = p2 - p1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: LatLon) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }

    pub fn center(&self) -> LatLon {
        LatLon::new((self.min_lat + self.max_lat) / 2.0, (self.min_lon + self.max_lon) / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        LatLon::new(self.min_lat, self.min_lon).is_valid()
            && LatLon::new(self.max_lat, self.max_lon).is_valid()
            && self.min_lat < self.max_lat
            && self.min_lon < self.max_lon
    }
}

/// Points grouped into fixed-size lat/lon cells; each cell keeps the bounding
/// box of its members and their indices into the input slice.
#[derive(Clone, Debug)]
pub struct CellBuckets {
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub lo: LatLon,
    pub hi: LatLon,
    pub members: Vec<u32>,
}

impl Cell {
    /// Point of the cell's box closest to `p` in lat/lon.
    pub fn clamp(&self, p: LatLon) -> LatLon {
        LatLon::new(p.lat.clamp(self.lo.lat, self.hi.lat), p.lon.clamp(self.lo.lon, self.hi.lon))
    }
}

impl CellBuckets {
    pub fn build(cell_deg: f64, points: &[LatLon]) -> Self {
        assert!(cell_deg > 0.0, "cell size must be positive");
        let mut by_cell: std::collections::BTreeMap<(i64, i64), Cell> = Default::default();
        for (i, p) in points.iter().enumerate() {
            let key = ((p.lat / cell_deg).floor() as i64, (p.lon / cell_deg).floor() as i64);
            let cell = by_cell.entry(key).or_insert(Cell { lo: *p, hi: *p, members: Vec::new() });
            cell.lo = LatLon::new(cell.lo.lat.min(p.lat), cell.lo.lon.min(p.lon));
            cell.hi = LatLon::new(cell.hi.lat.max(p.lat), cell.hi.lon.max(p.lon));
            cell.members.push(i as u32);
        }
        Self { cells: by_cell.into_values().collect() }
    }
}

/// Points bucketed on a uniform lat/lon grid, supporting nearest and radius queries.
#[derive(Clone, Debug)]
pub struct GridIndex<T> {
    cell_deg: f64,
    cells: HashMap<(i32, i32), Vec<(LatLon, T)>>,
    min_cell: (i32, i32),
    max_cell: (i32, i32),
}

impl<T: Copy> GridIndex<T> {
    pub fn new(cell_deg: f64) -> Self {
        assert!(cell_deg > 0.0, "cell size must be positive");
        Self {
            cell_deg,
            cells: HashMap::new(),
            min_cell: (i32::MAX, i32::MAX),
            max_cell: (i32::MIN, i32::MIN),
        }
    }

    pub fn build(cell_deg: f64, items: impl IntoIterator<Item = (LatLon, T)>) -> Self {
        let mut index = Self::new(cell_deg);
        for (p, v) in items {
            index.insert(p, v);
        }
        index
    }

    fn cell_of(&self, p: LatLon) -> (i32, i32) {
        ((p.lat / self.cell_deg).floor() as i32, (p.lon / self.cell_deg).floor() as i32)
    }

    pub fn insert(&mut self, p: LatLon, value: T) {
        let c = self.cell_of(p);
        self.min_cell = (self.min_cell.0.min(c.0), self.min_cell.1.min(c.1));
        self.max_cell = (self.max_cell.0.max(c.0), self.max_cell.1.max(c.1));
        self.cells.entry(c).or_default().push((p, value));
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Nearest item accepted by `keep`, with its distance in km.
    pub fn nearest_where(&self, p: LatLon, mut keep: impl FnMut(&T) -> bool) -> Option<(T, f64)> {
        if self.is_empty() {
            return None;
        }
        let (ci, cj) = self.cell_of(p);
        // Smallest km extent of one cell; used as a lower bound on ring distance.
        let cell_km = self.cell_deg * KM_PER_DEG_LAT * p.lat.to_radians().cos().abs().max(0.05);
        let max_ring = [
            (ci - self.min_cell.0).abs(),
            (self.max_cell.0 - ci).abs(),
            (cj - self.min_cell.1).abs(),
            (self.max_cell.1 - cj).abs(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        let mut best: Option<(T, f64)> = None;
        for ring in 0..=max_ring {
            if let Some((_, d)) = best {
                if (ring - 1) as f64 * cell_km > d {
                    break;
                }
            }
            for (di, dj) in ring_cells(ring) {
                if let Some(bucket) = self.cells.get(&(ci + di, cj + dj)) {
                    for (q, v) in bucket {
                        if !keep(v) {
                            continue;
                        }
                        let d = haversine_km(p, *q);
                        if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                            best = Some((*v, d));
                        }
                    }
                }
            }
        }
        best
    }

    pub fn nearest(&self, p: LatLon) -> Option<(T, f64)> {
        self.nearest_where(p, |_| true)
    }

    /// All items within `radius_km` of `p`.
    pub fn within_radius(&self, p: LatLon, radius_km: f64) -> Vec<(T, f64)> {
        let mut out = Vec::new();
        if self.is_empty() || radius_km < 0.0 {
            return out;
        }
        let (ci, cj) = self.cell_of(p);
        let cell_km = self.cell_deg * KM_PER_DEG_LAT * p.lat.to_radians().cos().abs().max(0.05);
        let rings = (radius_km / cell_km).ceil() as i32 + 1;
        for di in -rings..=rings {
            for dj in -rings..=rings {
                if let Some(bucket) = self.cells.get(&(ci + di, cj + dj)) {
                    for (q, v) in bucket {
                        let d = haversine_km(p, *q);
                        if d <= radius_km {
                            out.push((*v, d));
                        }
                    }
                }
            }
        }
        out
    }
}

fn ring_cells(ring: i32) -> Vec<(i32, i32)> {
    if ring == 0 {
        return vec![(0, 0)];
    }
    let mut cells = Vec::with_capacity(8 * ring as usize);
    for d in -ring..=ring {
        cells.push((-ring, d));
        cells.push((ring, d));
    }
    for d in -ring + 1..ring {
        cells.push((d, -ring));
        cells.push((d, ring));
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haversine_one_degree_of_latitude() {
        let d = haversine_km(LatLon::new(0.0, 0.0), LatLon::new(1.0, 0.0));
        assert!((d - KM_PER_DEG_LAT).abs() < 1e-9);
    }

    #[test]
    fn offset_round_trips_distance() {
        let o = LatLon::new(34.0, -118.3);
        let p = o.offset_km(3.0, 4.0);
        assert!((haversine_km(o, p) - 5.0).abs() < 0.01);
    }

    #[test]
    fn grid_nearest_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<LatLon> = (0..500)
            .map(|_| LatLon::new(rng.random_range(33.5..34.5), rng.random_range(-118.8..-117.8)))
            .collect();
        let index = GridIndex::build(0.02, pts.iter().copied().enumerate().map(|(i, p)| (p, i)));
        for _ in 0..50 {
            let q = LatLon::new(rng.random_range(33.4..34.6), rng.random_range(-118.9..-117.7));
            let (got, d) = index.nearest(q).unwrap();
            let (want, dw) = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (i, haversine_km(q, *p)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!((d - dw).abs() < 1e-12, "{got} vs {want}");
        }
        let near = index.within_radius(pts[0], 5.0);
        let brute = pts.iter().filter(|p| haversine_km(pts[0], **p) <= 5.0).count();
        assert_eq!(near.len(), brute);
    }
}

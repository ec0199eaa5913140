use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::domain::{ActivitySet, ActivityType, PoiId, PoiLookup, PoiRecord, N_ACTIVITY_TYPES};
use crate::geo::{BoundingBox, CellBuckets, GridIndex, LatLon};
use crate::rng::{self, Stage};

use ActivityType::*;

/// Reference POI counts per activity type for the full-size city.
pub const REFERENCE_POI_COUNTS: [(ActivityType, usize); N_ACTIVITY_TYPES] = [
    (Transportation, 449),
    (Home, 2_509_756),
    (Work, 409_920),
    (School, 10_904),
    (ChildCare, 33_821),
    (BuyGoods, 108_496),
    (Services, 17_028),
    (EatOut, 165_442),
    (Errands, 4_414),
    (Recreation, 17_685),
    (Exercise, 30_520),
    (Visit, 2_509_756),
    (HealthCare, 3_100),
    (Religious, 7_255),
    (SomethingElse, 2_054),
    (DropOff, 2_838_192),
];

/// Population the reference counts were sized for.
pub const REFERENCE_AGENTS: usize = 200_000;

/// Non-residential place kinds, in the order DropOff is handed out.
const PLACE_KINDS: [(ActivityType, &str); 12] = [
    (School, "School"),
    (ChildCare, "Child Care Center"),
    (Transportation, "Transit Station"),
    (BuyGoods, "Store"),
    (EatOut, "Restaurant"),
    (Recreation, "Recreation Venue"),
    (Exercise, "Fitness Center"),
    (Services, "Service Center"),
    (HealthCare, "Clinic"),
    (Religious, "Place of Worship"),
    (Errands, "Post Office"),
    (SomethingElse, "Venue"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoiConfig {
    /// Number of POIs valid for each activity type. Home and Visit share the
    /// residential set so their counts must match; DropOff covers every
    /// residence plus some non-residential places.
    pub counts: HashMap<ActivityType, usize>,
    pub n_centers: usize,
    pub center_sigma_km: f64,
    /// Extra spread applied to residences relative to commercial places.
    pub residential_spread: f64,
    /// Share of POIs placed uniformly instead of around a center.
    pub background_fraction: f64,
}

impl Default for PoiConfig {
    fn default() -> Self {
        Self::scaled_for_agents(1_000)
    }
}

impl PoiConfig {
    /// Reference counts scaled by `n_agents / 200_000`, at least one per type.
    pub fn scaled_for_agents(n_agents: usize) -> Self {
        let factor = n_agents as f64 / REFERENCE_AGENTS as f64;
        let counts = REFERENCE_POI_COUNTS
            .iter()
            .map(|(t, n)| (*t, ((*n as f64 * factor).round() as usize).max(1)))
            .collect();
        Self { counts, n_centers: 5, center_sigma_km: 5.0, residential_spread: 1.6, background_fraction: 0.12 }
    }

    pub fn count(&self, t: ActivityType) -> usize {
        self.counts.get(&t).copied().unwrap_or(0)
    }
}

/// Activity types with at least this many POIs get cell buckets.
pub const BUCKETED_MIN_POIS: usize = 1024;

/// POIs indexed by id, by activity type and by location.
#[derive(Clone, Debug)]
pub struct PoiCatalog {
    pois: Vec<PoiRecord>,
    index: HashMap<PoiId, usize>,
    by_activity: Vec<Vec<PoiId>>,
    by_activity_points: Vec<Vec<LatLon>>,
    by_activity_cells: Vec<Option<CellBuckets>>,
    spatial: GridIndex<PoiId>,
}

impl PoiLookup for PoiCatalog {
    fn contains_poi(&self, id: PoiId) -> bool {
        self.index.contains_key(&id)
    }
}

impl PoiCatalog {
    pub fn from_records(pois: Vec<PoiRecord>) -> Result<Self, WorldError> {
        let mut index = HashMap::with_capacity(pois.len());
        let mut by_activity = vec![Vec::new(); N_ACTIVITY_TYPES];
        for (i, p) in pois.iter().enumerate() {
            if index.insert(p.poi_id, i).is_some() {
                return Err(WorldError::DuplicatePoi(p.poi_id));
            }
            if !p.location().is_valid() {
                return Err(WorldError::BadCoordinates { poi_id: p.poi_id, lat: p.latitude, lon: p.longitude });
            }
            if p.act_types.is_empty() {
                return Err(WorldError::NoActivityTypes(p.poi_id));
            }
            for t in p.act_types.iter() {
                by_activity[t.index()].push(p.poi_id);
            }
        }
        let by_activity_points: Vec<Vec<LatLon>> =
            by_activity.iter().map(|ids| ids.iter().map(|id| pois[index[id]].location()).collect()).collect();
        let by_activity_cells = by_activity_points
            .iter()
            .map(|pts| (pts.len() >= BUCKETED_MIN_POIS).then(|| CellBuckets::build(0.01, pts)))
            .collect();
        let spatial = GridIndex::build(0.01, pois.iter().map(|p| (p.location(), p.poi_id)));
        Ok(Self { pois, index, by_activity, by_activity_points, by_activity_cells, spatial })
    }

    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    pub fn records(&self) -> &[PoiRecord] {
        &self.pois
    }

    pub fn get(&self, id: PoiId) -> Option<&PoiRecord> {
        self.index.get(&id).map(|&i| &self.pois[i])
    }

    /// Location of a POI known to be in the catalog.
    pub fn location(&self, id: PoiId) -> LatLon {
        self.get(id).map(PoiRecord::location).unwrap_or_else(|| panic!("POI {id} not in catalog"))
    }

    pub fn is_valid_for(&self, id: PoiId, t: ActivityType) -> bool {
        self.get(id).is_some_and(|p| p.act_types.contains(t))
    }

    pub fn by_activity(&self, t: ActivityType) -> &[PoiId] {
        &self.by_activity[t.index()]
    }

    /// Locations aligned with [`PoiCatalog::by_activity`].
    pub fn activity_points(&self, t: ActivityType) -> &[LatLon] {
        &self.by_activity_points[t.index()]
    }

    /// Cell buckets over [`PoiCatalog::activity_points`], kept for types with
    /// many POIs.
    pub fn activity_cells(&self, t: ActivityType) -> Option<&CellBuckets> {
        self.by_activity_cells[t.index()].as_ref()
    }

    /// Fails naming the first activity type with no valid POI.
    pub fn check_coverage(&self) -> Result<(), WorldError> {
        match ActivityType::ALL.into_iter().find(|t| self.by_activity(*t).is_empty()) {
            Some(t) => Err(WorldError::NoPoisFor(t)),
            None => Ok(()),
        }
    }

    pub fn nearest_where(&self, p: LatLon, keep: impl FnMut(&PoiId) -> bool) -> Option<(PoiId, f64)> {
        self.spatial.nearest_where(p, keep)
    }

    pub fn within_radius(&self, p: LatLon, radius_km: f64) -> Vec<(PoiId, f64)> {
        self.spatial.within_radius(p, radius_km)
    }
}

struct Center {
    at: LatLon,
    weight: f64,
    sigma_km: f64,
}

fn uniform_in(bbox: &BoundingBox, rng: &mut impl Rng) -> LatLon {
    LatLon::new(rng.random_range(bbox.min_lat..bbox.max_lat), rng.random_range(bbox.min_lon..bbox.max_lon))
}

fn place(bbox: &BoundingBox, centers: &[Center], cfg: &PoiConfig, spread: f64, rng: &mut impl Rng) -> LatLon {
    if rng.random::<f64>() < cfg.background_fraction {
        return uniform_in(bbox, rng);
    }
    let total: f64 = centers.iter().map(|c| c.weight).sum();
    let mut pick = rng.random::<f64>() * total;
    let center = centers
        .iter()
        .find(|c| {
            pick -= c.weight;
            pick <= 0.0
        })
        .unwrap_or(&centers[centers.len() - 1]);
    let normal = Normal::new(0.0, center.sigma_km * spread).expect("positive sigma");
    for _ in 0..32 {
        let p = center.at.offset_km(normal.sample(rng), normal.sample(rng));
        if bbox.contains(p) {
            return p;
        }
    }
    uniform_in(bbox, rng)
}

/// Seeded synthetic POI catalog inside `bbox`.
///
/// Residences carry `Home|Visit|DropOff`; every non-residential place carries
/// its primary type, most carry `Work`, and the first ones (schools, child
/// care, stations, ...) also carry `DropOff` until the configured count is met.
pub fn generate_poi_catalog(bbox: &BoundingBox, cfg: &PoiConfig, seed: u64) -> Result<PoiCatalog, WorldError> {
    if !bbox.is_valid() {
        return Err(WorldError::Config(format!("invalid bounding box {bbox:?}")));
    }
    if let Some(t) = ActivityType::ALL.into_iter().find(|t| cfg.count(*t) == 0) {
        return Err(WorldError::Config(format!("POI count for {t} must be positive")));
    }
    if cfg.n_centers == 0 || cfg.center_sigma_km <= 0.0 || !(0.0..=1.0).contains(&cfg.background_fraction) {
        return Err(WorldError::Config("centers, sigma and background fraction out of range".into()));
    }
    let residences = cfg.count(Home);
    if cfg.count(Visit) != residences {
        return Err(WorldError::Config(format!(
            "Visit count {} must equal Home count {residences}: both use the residential set",
            cfg.count(Visit)
        )));
    }
    let n_primary: usize = PLACE_KINDS.iter().map(|(t, _)| cfg.count(*t)).sum();
    let n_offices = cfg.count(Work).saturating_sub(n_primary);
    let extra_dropoff = cfg
        .count(DropOff)
        .checked_sub(residences)
        .ok_or_else(|| WorldError::Config("DropOff count must cover every residence".into()))?;
    if extra_dropoff > n_primary {
        return Err(WorldError::Config(format!(
            "DropOff count exceeds residences plus {n_primary} non-residential places"
        )));
    }

    let mut rng = rng::stream(seed, Stage::Pois, 0);
    let inner = |lo: f64, hi: f64, rng: &mut rand_chacha::ChaCha8Rng| lo + (hi - lo) * rng.random_range(0.2..0.8);
    let centers: Vec<Center> = (0..cfg.n_centers)
        .map(|i| Center {
            at: LatLon::new(inner(bbox.min_lat, bbox.max_lat, &mut rng), inner(bbox.min_lon, bbox.max_lon, &mut rng)),
            weight: 1.0 / (i as f64 + 1.0),
            sigma_km: cfg.center_sigma_km * rng.random_range(0.6..1.4),
        })
        .collect();

    let mut pois = Vec::with_capacity(residences + n_primary + n_offices);
    let mut next_id: PoiId = 0;
    let mut push = |name: String, at: LatLon, act_types: ActivitySet, pois: &mut Vec<PoiRecord>| {
        pois.push(PoiRecord { poi_id: next_id, name, latitude: at.lat, longitude: at.lon, act_types });
        next_id += 1;
    };

    let residential = ActivitySet::of(&[Home, Visit, DropOff]);
    for _ in 0..residences {
        let at = place(bbox, &centers, cfg, cfg.residential_spread, &mut rng);
        push(String::new(), at, residential, &mut pois);
    }

    let mut work_left = cfg.count(Work);
    let mut dropoff_left = extra_dropoff;
    for (t, label) in PLACE_KINDS {
        for serial in 1..=cfg.count(t) {
            let mut types = ActivitySet::EMPTY.with(t);
            if work_left > 0 {
                types.insert(Work);
                work_left -= 1;
            }
            if dropoff_left > 0 {
                types.insert(DropOff);
                dropoff_left -= 1;
            }
            let at = place(bbox, &centers, cfg, 1.0, &mut rng);
            push(format!("{label} {serial}"), at, types, &mut pois);
        }
    }
    for serial in 1..=n_offices {
        let at = place(bbox, &centers, cfg, 1.0, &mut rng);
        push(format!("Office {serial}"), at, ActivitySet::EMPTY.with(Work), &mut pois);
    }

    let catalog = PoiCatalog::from_records(pois)?;
    catalog.check_coverage()?;
    Ok(catalog)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bbox() -> BoundingBox {
        BoundingBox { min_lat: 33.8, max_lat: 34.2, min_lon: -118.5, max_lon: -118.0 }
    }

    fn small_config(residences: usize) -> PoiConfig {
        let mut cfg = PoiConfig::scaled_for_agents(200);
        cfg.counts.insert(Home, residences);
        cfg.counts.insert(Visit, residences);
        cfg.counts.insert(DropOff, residences + 20);
        cfg
    }

    #[test]
    fn home_and_visit_share_the_residential_set() {
        let catalog = generate_poi_catalog(&bbox(), &small_config(1000), 1).unwrap();
        assert_eq!(catalog.by_activity(Home).len(), 1000);
        assert_eq!(catalog.by_activity(Home), catalog.by_activity(Visit));
        let dropoff: std::collections::HashSet<_> = catalog.by_activity(DropOff).iter().collect();
        assert!(catalog.by_activity(Home).iter().all(|id| dropoff.contains(id)));
        assert_eq!(catalog.by_activity(DropOff).len(), 1020);
    }

    #[test]
    fn per_type_counts_are_exact_and_indexed() {
        let cfg = small_config(500);
        let catalog = generate_poi_catalog(&bbox(), &cfg, 2).unwrap();
        for t in ActivityType::ALL {
            assert_eq!(catalog.by_activity(t).len(), cfg.count(t), "{t}");
            for id in catalog.by_activity(t) {
                assert!(catalog.get(*id).unwrap().act_types.contains(t));
            }
        }
        assert!(catalog.records().iter().all(|p| bbox().contains(p.location())));
    }

    #[test]
    fn zero_counts_are_rejected() {
        let mut cfg = small_config(100);
        cfg.counts.insert(Religious, 0);
        assert!(matches!(generate_poi_catalog(&bbox(), &cfg, 1), Err(WorldError::Config(_))));
        let empty = PoiConfig { counts: HashMap::new(), ..PoiConfig::default() };
        assert!(generate_poi_catalog(&bbox(), &empty, 1).is_err());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let a = generate_poi_catalog(&bbox(), &small_config(300), 9).unwrap();
        let b = generate_poi_catalog(&bbox(), &small_config(300), 9).unwrap();
        let c = generate_poi_catalog(&bbox(), &small_config(300), 10).unwrap();
        assert_eq!(a.records(), b.records());
        assert_ne!(a.records(), c.records());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let rec = PoiRecord {
            poi_id: 4,
            name: String::new(),
            latitude: 34.0,
            longitude: -118.0,
            act_types: ActivitySet::of(&[Home]),
        };
        assert_eq!(PoiCatalog::from_records(vec![rec.clone(), rec]).unwrap_err(), WorldError::DuplicatePoi(4));
    }
}

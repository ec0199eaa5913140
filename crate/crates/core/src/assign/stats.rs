use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::AssignError;
use crate::domain::{AgentRecord, Staypoint, SECONDS_PER_DAY};
use crate::geo::{haversine_km, LatLon};
use crate::par;
use crate::routing::TravelTimeOracle;
use crate::world::PoiCatalog;

/// Root-mean-square great-circle distance from the lat/lon centroid.
pub fn radius_of_gyration(points: &[LatLon]) -> Result<f64, AssignError> {
    if points.is_empty() {
        return Err(AssignError::NoPoints);
    }
    let n = points.len() as f64;
    let centroid = LatLon::new(
        points.iter().map(|p| p.lat).sum::<f64>() / n,
        points.iter().map(|p| p.lon).sum::<f64>() / n,
    );
    let ms = points.iter().map(|p| haversine_km(*p, centroid).powi(2)).sum::<f64>() / n;
    Ok(ms.sqrt())
}

/// Median, mean and 90th percentile; quantiles interpolate linearly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub p90: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Self::default();
        }
        v.sort_by(f64::total_cmp);
        Self { n: v.len(), median: quantile(&v, 0.5), mean: v.iter().sum::<f64>() / v.len() as f64, p90: quantile(&v, 0.9) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MobilityStats {
    pub radius_of_gyration_km: Summary,
    pub daily_distance_km: Summary,
    pub locations_per_day: Summary,
    pub commute_minutes: Summary,
    /// Share of agents whose radius of gyration is finite and above zero.
    pub rog_nonzero_fraction: f64,
}

impl MobilityStats {
    /// Flat key/value view for report files.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (name, s) in [
            ("radius_of_gyration_km", &self.radius_of_gyration_km),
            ("daily_distance_km", &self.daily_distance_km),
            ("locations_per_day", &self.locations_per_day),
            ("commute_minutes", &self.commute_minutes),
        ] {
            out.push((format!("{name}.n"), s.n as f64));
            out.push((format!("{name}.median"), s.median));
            out.push((format!("{name}.mean"), s.mean));
            out.push((format!("{name}.p90"), s.p90));
        }
        out.push(("rog_nonzero_fraction".into(), self.rog_nonzero_fraction));
        out
    }
}

fn covered_days(seq: &[Staypoint]) -> i64 {
    match (seq.first(), seq.iter().map(|s| s.end).max()) {
        (Some(first), Some(last)) => ((last.0 - first.start.0) as f64 / SECONDS_PER_DAY as f64).ceil().max(1.0) as i64,
        _ => 0,
    }
}

/// Great-circle distance between consecutive staypoints, per covered day.
pub fn agent_daily_distance_km(seq: &[Staypoint], catalog: &PoiCatalog) -> f64 {
    let days = covered_days(seq);
    if days == 0 {
        return 0.0;
    }
    let total: f64 =
        seq.windows(2).map(|w| haversine_km(catalog.location(w[0].poi_id), catalog.location(w[1].poi_id))).sum();
    total / days as f64
}

/// Mean number of distinct POIs whose staypoints overlap each local day.
pub fn agent_locations_per_day(seq: &[Staypoint]) -> f64 {
    let Some(first) = seq.first() else { return 0.0 };
    let last_end = seq.iter().map(|s| s.end).max().expect("non-empty");
    let mut day_start = first.start.local_midnight();
    let (mut days, mut total) = (0usize, 0usize);
    while day_start < last_end {
        let day_end = day_start.plus(SECONDS_PER_DAY);
        let distinct: HashSet<_> =
            seq.iter().filter(|s| s.start < day_end && s.end > day_start).map(|s| s.poi_id).collect();
        total += distinct.len();
        days += 1;
        day_start = day_end;
    }
    if days == 0 {
        0.0
    } else {
        total as f64 / days as f64
    }
}

/// Distribution summaries over agents. `staypoints` holds one time-sorted
/// sequence per agent, in the same order as `agents`.
pub fn compute_mobility_stats(
    staypoints: &[Vec<Staypoint>],
    agents: &[AgentRecord],
    catalog: &PoiCatalog,
    oracle: &TravelTimeOracle,
) -> MobilityStats {
    let per_agent: Vec<(f64, f64, f64)> = par::map(staypoints, |seq| {
        if seq.is_empty() {
            return (f64::NAN, f64::NAN, f64::NAN);
        }
        let points: Vec<LatLon> = seq.iter().map(|s| catalog.location(s.poi_id)).collect();
        let rog = radius_of_gyration(&points).unwrap_or(f64::NAN);
        (rog, agent_daily_distance_km(seq, catalog), agent_locations_per_day(seq))
    });
    let commutes: Vec<f64> = par::map(agents, |a| match a.work_poi {
        Some(w) => oracle
            .shortest_travel_time(catalog.location(a.home_poi), catalog.location(w))
            .map(|s| s / 60.0)
            .unwrap_or(f64::NAN),
        None => f64::NAN,
    });
    let rogs: Vec<f64> = per_agent.iter().map(|x| x.0).collect();
    let nonzero = rogs.iter().filter(|r| r.is_finite() && **r > 0.0).count();
    MobilityStats {
        radius_of_gyration_km: Summary::of(&rogs),
        daily_distance_km: Summary::of(&per_agent.iter().map(|x| x.1).collect::<Vec<_>>()),
        locations_per_day: Summary::of(&per_agent.iter().map(|x| x.2).collect::<Vec<_>>()),
        commute_minutes: Summary::of(&commutes),
        rog_nonzero_fraction: if staypoints.is_empty() { 0.0 } else { nonzero as f64 / staypoints.len() as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ActivitySet, ActivityType, PoiRecord, Timestamp};

    #[test]
    fn radius_of_gyration_cases() {
        let a = LatLon::new(34.0, -118.0);
        assert_eq!(radius_of_gyration(&[a]).unwrap(), 0.0);
        assert_eq!(radius_of_gyration(&[a, a, a]).unwrap(), 0.0);
        assert_eq!(radius_of_gyration(&[]), Err(AssignError::NoPoints));
        let b = a.offset_km(10.0, 0.0);
        assert!((haversine_km(a, b) - 10.0).abs() < 1e-3);
        assert!((radius_of_gyration(&[a, b]).unwrap() - 5.0).abs() < 1e-3);
    }

    #[test]
    fn summary_interpolates() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
        assert!((s.p90 - 3.7).abs() < 1e-12);
    }

    fn two_poi_catalog(km: f64) -> PoiCatalog {
        let a = LatLon::new(34.0, -118.0);
        let b = a.offset_km(km, 0.0);
        let rec = |id, p: LatLon, t| PoiRecord {
            poi_id: id,
            name: String::new(),
            latitude: p.lat,
            longitude: p.lon,
            act_types: ActivitySet::of(&[t]),
        };
        PoiCatalog::from_records(vec![rec(1, a, ActivityType::Home), rec(2, b, ActivityType::Work)]).unwrap()
    }

    #[test]
    fn commuter_travels_twice_the_separation_each_day() {
        let catalog = two_poi_catalog(5.0);
        let t = |d, h| Timestamp::local(2024, 1, d, h, 0, 0);
        let mut seq = Vec::new();
        for d in 1..=3 {
            seq.push(Staypoint::new(0, 1, t(d, 0), t(d, 8)));
            seq.push(Staypoint::new(0, 2, t(d, 9), t(d, 17)));
            seq.push(Staypoint::new(0, 1, t(d, 18), t(d, 23)));
        }
        let one_km_error = haversine_km(catalog.location(1), catalog.location(2)) - 5.0;
        assert!(one_km_error.abs() < 1e-3);
        // 3 days, 6 legs out and back plus 2 overnight zero-length hops.
        let per_day = agent_daily_distance_km(&seq, &catalog);
        assert!((per_day - 10.0).abs() < 0.01, "{per_day}");
        assert_eq!(agent_locations_per_day(&seq), 2.0);
    }

    #[test]
    fn homebody_stays_put() {
        let catalog = two_poi_catalog(5.0);
        let seq = vec![Staypoint::new(0, 1, Timestamp::local(2024, 1, 1, 0, 0, 0), Timestamp::local(2024, 1, 8, 0, 0, 0))];
        assert_eq!(agent_daily_distance_km(&seq, &catalog), 0.0);
        assert_eq!(agent_locations_per_day(&seq), 1.0);
    }
}

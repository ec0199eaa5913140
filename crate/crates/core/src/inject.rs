//! Labeled anomalies injected into the test window.
//!
//! Selected agents receive novel-POI visits, either once (non-recurring) or
//! at the same time of day on a weekly cadence (recurring), or have a routine
//! stay cut short. Neighbouring stays are trimmed to leave room for travel and
//! every changed row carries a label.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActivityType, AgentId, AnomalyLabel, PoiId, SimClock, Staypoint, Timestamp, MIN_STAY_SECONDS};
use crate::rng::{self, Stage};
use crate::routing::PoiRouter;

#[derive(Debug, Error, PartialEq)]
pub enum InjectError {
    #[error("invalid injection plan: {0}")]
    InvalidPlan(String),
    #[error("{what} prevalence {achieved:.6} is outside +/-{tolerance} of target {target:.6} ({details})")]
    TargetsUnreachable { what: &'static str, achieved: f64, target: f64, tolerance: f64, details: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectionPlan {
    /// Share of agents that receive anomalies.
    pub target_agent_prevalence: f64,
    /// Share of anomalous-file rows that carry a label.
    pub target_staypoint_prevalence: f64,
    /// Share of selected agents whose anomaly recurs.
    pub mix: f64,
    pub repeat_min: usize,
    pub repeat_max: usize,
    /// Days between recurring visits.
    pub cadence_days: u16,
    /// Start-time jitter of recurring visits, minutes either side.
    pub time_jitter_min: u16,
    /// Chance a non-recurring event shortens a routine stay instead of
    /// inserting a novel visit.
    pub early_departure_prob: f64,
    /// Recurring agents may instead raise their visit rate at a known POI.
    pub frequency_shift: bool,
    pub min_visit_hours: f64,
    pub max_visit_hours: f64,
    /// Novel POIs are drawn within this distance of home when possible.
    pub novel_radius_km: f64,
    /// Allowed relative deviation of achieved prevalences from the targets.
    pub tolerance: f64,
}

impl Default for InjectionPlan {
    fn default() -> Self {
        Self {
            target_agent_prevalence: 0.00191,
            target_staypoint_prevalence: 0.000203,
            mix: 0.5,
            repeat_min: 3,
            repeat_max: 4,
            cadence_days: 7,
            time_jitter_min: 15,
            early_departure_prob: 0.1,
            frequency_shift: false,
            min_visit_hours: 1.0,
            max_visit_hours: 11.0,
            novel_radius_km: 15.0,
            tolerance: 0.2,
        }
    }
}

impl InjectionPlan {
    pub fn validate(&self) -> Result<(), InjectError> {
        let bad = |m: &str| Err(InjectError::InvalidPlan(m.to_string()));
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.target_agent_prevalence) || !open_unit(self.target_staypoint_prevalence) {
            return bad("prevalences must lie strictly between 0 and 1");
        }
        if !(0.0..=1.0).contains(&self.mix) || !(0.0..=1.0).contains(&self.early_departure_prob) {
            return bad("mix and early_departure_prob must lie in [0, 1]");
        }
        if self.repeat_min < 2 || self.repeat_min > self.repeat_max {
            return bad("recurring anomalies need 2 <= repeat_min <= repeat_max");
        }
        if self.cadence_days == 0 {
            return bad("cadence_days must be positive");
        }
        if !(self.min_visit_hours > 0.0 && self.min_visit_hours <= self.max_visit_hours && self.max_visit_hours <= 20.0) {
            return bad("visit hours must satisfy 0 < min <= max <= 20");
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return bad("tolerance must lie strictly between 0 and 1");
        }
        Ok(())
    }

    /// Number of agents to make anomalous out of `n_agents`.
    pub fn anomalous_agent_count(&self, n_agents: usize) -> usize {
        (self.target_agent_prevalence * n_agents as f64).round() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    NonRecurring,
    Recurring,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    NovelVisit,
    EarlyDeparture,
    FrequencyShift,
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnomalyKind::NonRecurring => "non_recurring",
            AnomalyKind::Recurring => "recurring",
        })
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Template::NovelVisit => "novel_visit",
            Template::EarlyDeparture => "early_departure",
            Template::FrequencyShift => "frequency_shift",
        })
    }
}

/// One injected anomaly and the rows it produced.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyRecord {
    pub agent_id: AgentId,
    pub kind: AnomalyKind,
    pub template: Template,
    pub poi_id: Option<PoiId>,
    /// Rows absent from truth (type 2).
    pub injected: Vec<Staypoint>,
    /// Truth rows whose times changed (type 1).
    pub modified: Vec<Staypoint>,
}

impl AnomalyRecord {
    pub fn labeled(&self) -> usize {
        self.injected.len() + self.modified.len()
    }
}

/// Manifest row with staypoint references resolved to positions in the
/// agent's anomalous test sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub agent_id: AgentId,
    pub kind: AnomalyKind,
    pub template: Template,
    pub poi_id: Option<PoiId>,
    pub injected: Vec<usize>,
    pub modified: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InjectionOutcome {
    /// All agents' test rows, grouped by agent and time-sorted.
    pub anomalous: Vec<Staypoint>,
    pub records: Vec<AnomalyRecord>,
    /// Agents that were tried but could not take an anomaly, with the reason.
    pub skipped: Vec<(AgentId, String)>,
    pub n_agents: usize,
    pub anomalous_agents: usize,
    pub labeled_staypoints: usize,
    pub achieved_agent_prevalence: f64,
    pub achieved_staypoint_prevalence: f64,
}

impl InjectionOutcome {
    pub fn manifest(&self) -> Vec<ManifestRow> {
        let mut by_agent: HashMap<AgentId, Vec<&Staypoint>> = HashMap::new();
        for s in &self.anomalous {
            by_agent.entry(s.agent_id).or_default().push(s);
        }
        let locate = |agent: AgentId, rows: &[Staypoint]| -> Vec<usize> {
            let seq = &by_agent[&agent];
            rows.iter().filter_map(|r| seq.iter().position(|s| s.same_visit(r))).collect()
        };
        self.records
            .iter()
            .map(|r| ManifestRow {
                agent_id: r.agent_id,
                kind: r.kind,
                template: r.template,
                poi_id: r.poi_id,
                injected: locate(r.agent_id, &r.injected),
                modified: locate(r.agent_id, &r.modified),
            })
            .collect()
    }
}

fn group(rows: &[Staypoint]) -> BTreeMap<AgentId, Vec<Staypoint>> {
    let mut m: BTreeMap<AgentId, Vec<Staypoint>> = BTreeMap::new();
    for s in rows {
        m.entry(s.agent_id).or_default().push(*s);
    }
    m
}

/// Changes made by one insertion.
struct Insertion {
    injected: Staypoint,
    modified: Vec<Staypoint>,
}

/// Inserts a visit to `poi` over `[a, b)`, trimming the stay in progress at
/// `a` and, if needed, delaying the next one. A stay long enough to contain
/// the visit plus both trips is split in two around it instead.
fn try_insert(
    seq: &mut Vec<Staypoint>,
    poi: PoiId,
    a: Timestamp,
    b: Timestamp,
    router: &PoiRouter<'_>,
    clock: &SimClock,
) -> Option<Insertion> {
    if a < clock.test_start() || b >= clock.window_last() || b <= a {
        return None;
    }
    let k = seq.partition_point(|s| s.start <= a).checked_sub(1)?;
    let prev = seq[k];
    if prev.label != AnomalyLabel::Normal || a >= prev.end {
        return None;
    }
    let (tt_in, _) = router.travel_whole_seconds(prev.poi_id, poi);
    let new_prev_end = a.plus(-tt_in);
    if new_prev_end < prev.start.plus(MIN_STAY_SECONDS) {
        return None;
    }
    let injected = Staypoint::new(prev.agent_id, poi, a, b).with_label(AnomalyLabel::Injected);
    let first = Staypoint { end: new_prev_end, ..prev }.with_label(AnomalyLabel::Modified);

    let (tt_back, _) = router.travel_whole_seconds(poi, prev.poi_id);
    let resume = b.plus(tt_back);
    if resume.plus(MIN_STAY_SECONDS) <= prev.end {
        let second = Staypoint { start: resume, ..prev }.with_label(AnomalyLabel::Modified);
        seq.splice(k..=k, [first, injected, second]);
        return Some(Insertion { injected, modified: vec![first, second] });
    }

    let next = *seq.get(k + 1)?;
    if next.label != AnomalyLabel::Normal {
        return None;
    }
    let (tt_out, _) = router.travel_whole_seconds(poi, next.poi_id);
    let new_next_start = next.start.max(b.plus(tt_out));
    if new_next_start.plus(MIN_STAY_SECONDS) > next.end {
        return None;
    }
    let mut modified = vec![first];
    seq[k] = first;
    if new_next_start != next.start {
        let pushed = Staypoint { start: new_next_start, ..next }.with_label(AnomalyLabel::Modified);
        seq[k + 1] = pushed;
        modified.push(pushed);
    }
    seq.insert(k + 1, injected);
    Some(Insertion { injected, modified })
}

const MAX_ATTEMPTS: usize = 300;

struct AgentInjector<'a> {
    agent_id: AgentId,
    seq: Vec<Staypoint>,
    home: Option<PoiId>,
    history: HashSet<PoiId>,
    train_counts: HashMap<PoiId, usize>,
    used_days: HashSet<u16>,
    records: Vec<AnomalyRecord>,
    rng: ChaCha8Rng,
    router: &'a PoiRouter<'a>,
    clock: &'a SimClock,
    plan: &'a InjectionPlan,
}

impl<'a> AgentInjector<'a> {
    fn labeled(&self) -> usize {
        self.seq.iter().filter(|s| s.anomaly()).count()
    }

    fn novel_poi(&mut self) -> Option<PoiId> {
        let catalog = self.router.catalog();
        let non_residential = |p: &PoiId| !catalog.is_valid_for(*p, ActivityType::Home);
        let fresh = |p: &PoiId| !self.history.contains(p);
        let near: Vec<PoiId> = match self.home {
            Some(h) => catalog
                .within_radius(catalog.location(h), self.plan.novel_radius_km)
                .into_iter()
                .map(|(p, _)| p)
                .filter(|p| non_residential(p) && fresh(p))
                .collect(),
            None => Vec::new(),
        };
        let pool: Vec<PoiId> = if near.is_empty() {
            catalog.records().iter().map(|r| r.poi_id).filter(|p| non_residential(p) && fresh(p)).collect()
        } else {
            near
        };
        let mut pool = pool;
        pool.sort_unstable();
        pool.choose(&mut self.rng).copied()
    }

    fn visit_seconds(&mut self) -> i64 {
        let h = self.rng.random_range(self.plan.min_visit_hours..=self.plan.max_visit_hours);
        (h * 3600.0 / 60.0).round() as i64 * 60
    }

    fn test_days(&self) -> std::ops::RangeInclusive<u16> {
        let first = self.clock.day_of(self.clock.test_start()).expect("test start in window");
        first..=self.clock.n_days()
    }

    fn commit(&mut self, kind: AnomalyKind, template: Template, poi: Option<PoiId>, parts: Vec<Insertion>, days: &[u16]) {
        if let Some(p) = poi {
            self.history.insert(p);
        }
        self.used_days.extend(days);
        let mut rec = AnomalyRecord { agent_id: self.agent_id, kind, template, poi_id: poi, injected: vec![], modified: vec![] };
        for part in parts {
            rec.injected.push(part.injected);
            rec.modified.extend(part.modified);
        }
        self.records.push(rec);
    }

    fn novel_visit(&mut self) -> bool {
        let days: Vec<u16> = self.test_days().filter(|d| !self.used_days.contains(d)).collect();
        for _ in 0..MAX_ATTEMPTS {
            let (Some(&day), Some(poi)) = (days.choose(&mut self.rng), self.novel_poi()) else { return false };
            let a = self.clock.day_start(day).plus(self.rng.random_range(0..288) * 300);
            let b = a.plus(self.visit_seconds());
            let mut trial = self.seq.clone();
            if let Some(ins) = try_insert(&mut trial, poi, a, b, self.router, self.clock) {
                self.seq = trial;
                self.commit(AnomalyKind::NonRecurring, Template::NovelVisit, Some(poi), vec![ins], &[day]);
                return true;
            }
        }
        false
    }

    fn early_departure(&mut self) -> bool {
        let candidates: Vec<usize> = (0..self.seq.len())
            .filter(|&i| {
                let s = &self.seq[i];
                s.label == AnomalyLabel::Normal
                    && s.duration_seconds() >= 2 * 3600
                    && self.train_counts.get(&s.poi_id).copied().unwrap_or(0) >= 3
                    && self.clock.day_of(s.start).is_some_and(|d| !self.used_days.contains(&d))
            })
            .collect();
        let Some(&i) = candidates.choose(&mut self.rng) else { return false };
        let s = self.seq[i];
        let cut = self.rng.random_range(0.25..=0.75);
        let kept = ((s.duration_seconds() as f64 * (1.0 - cut)).round() as i64).max(MIN_STAY_SECONDS);
        let shortened = Staypoint { end: s.start.plus(kept), ..s }.with_label(AnomalyLabel::Modified);
        self.seq[i] = shortened;
        let day = self.clock.day_of(s.start).expect("in window");
        self.used_days.insert(day);
        self.records.push(AnomalyRecord {
            agent_id: self.agent_id,
            kind: AnomalyKind::NonRecurring,
            template: Template::EarlyDeparture,
            poi_id: Some(s.poi_id),
            injected: vec![],
            modified: vec![shortened],
        });
        true
    }

    fn known_poi(&mut self) -> Option<PoiId> {
        let mut known: Vec<PoiId> =
            self.train_counts.keys().copied().filter(|p| Some(*p) != self.home).collect();
        known.sort_unstable();
        known.choose(&mut self.rng).copied()
    }

    /// Weekly visits to one POI at a fixed time of day.
    fn recurring(&mut self, template: Template) -> Result<(), String> {
        let days = self.test_days();
        let cadence = self.plan.cadence_days;
        for _ in 0..MAX_ATTEMPTS {
            let repeats = self.rng.random_range(self.plan.repeat_min..=self.plan.repeat_max);
            let span = cadence * (repeats as u16 - 1);
            if *days.start() + span > *days.end() {
                return Err(format!("{repeats} visits every {cadence} days do not fit in the test window"));
            }
            let last_first = (*days.end() - span).min(*days.start() + cadence - 1);
            let first_day = self.rng.random_range(*days.start()..=last_first);
            let poi = match template {
                Template::FrequencyShift => self.known_poi(),
                _ => self.novel_poi(),
            };
            let Some(poi) = poi else { return Err("no candidate POI".into()) };
            let minute = self.rng.random_range(0..288) * 5;
            let length = self.visit_seconds();
            let mut trial = self.seq.clone();
            let mut parts = Vec::with_capacity(repeats);
            let mut used = Vec::with_capacity(repeats);
            for r in 0..repeats {
                let day = first_day + cadence * r as u16;
                let jitter = self.rng.random_range(-(self.plan.time_jitter_min as i64)..=self.plan.time_jitter_min as i64);
                let a = self.clock.day_start(day).plus((minute as i64 + jitter) * 60);
                if self.used_days.contains(&day) {
                    break;
                }
                match try_insert(&mut trial, poi, a, a.plus(length), self.router, self.clock) {
                    Some(ins) => {
                        parts.push(ins);
                        used.push(day);
                    }
                    None => break,
                }
            }
            if parts.len() == repeats {
                self.seq = trial;
                self.commit(AnomalyKind::Recurring, template, Some(poi), parts, &used);
                return Ok(());
            }
        }
        Err("no feasible recurring slot".into())
    }

    fn non_recurring(&mut self) -> bool {
        if self.rng.random_bool(self.plan.early_departure_prob) && self.early_departure() {
            return true;
        }
        self.novel_visit()
    }
}

fn eligible(seq: &[Staypoint], clock: &SimClock) -> bool {
    let mut per_day: HashMap<u16, usize> = HashMap::new();
    for s in seq {
        if let Some(d) = clock.day_of(s.start) {
            *per_day.entry(d).or_default() += 1;
        }
    }
    per_day.values().any(|n| *n >= 3)
}

/// Builds the anomalous test table from clean train and test tables.
///
/// `homes` maps agents to their residence, used to keep novel POIs local.
pub fn build_anomalous_testset(
    train: &[Staypoint],
    test: &[Staypoint],
    homes: &HashMap<AgentId, PoiId>,
    router: &PoiRouter<'_>,
    clock: &SimClock,
    plan: &InjectionPlan,
    seed: u64,
) -> Result<InjectionOutcome, InjectError> {
    plan.validate()?;
    let train_by = group(train);
    let mut test_by = group(test);
    let n_agents = test_by.len();
    let n_rows = test.len();
    let n_select = plan.anomalous_agent_count(n_agents);
    let target_rows = plan.target_staypoint_prevalence * n_rows as f64;

    let mut candidates: Vec<AgentId> = test_by.keys().copied().collect();
    let mut rng = rng::stream(seed, Stage::Injection, u64::MAX);
    candidates.shuffle(&mut rng);
    let n_recurring = (plan.mix * n_select as f64).round() as usize;

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut done = 0usize;
    let mut labeled_total = 0usize;
    for agent_id in candidates {
        if done == n_select {
            break;
        }
        let seq = &test_by[&agent_id];
        if !eligible(seq, clock) {
            skipped.push((agent_id, "fewer than 3 test staypoints on every day".to_string()));
            continue;
        }
        let train_seq = train_by.get(&agent_id).map(Vec::as_slice).unwrap_or(&[]);
        let mut train_counts: HashMap<PoiId, usize> = HashMap::new();
        for s in train_seq {
            *train_counts.entry(s.poi_id).or_default() += 1;
        }
        let history: HashSet<PoiId> = train_seq.iter().chain(seq.iter()).map(|s| s.poi_id).collect();
        let mut inj = AgentInjector {
            agent_id,
            seq: seq.clone(),
            home: homes.get(&agent_id).copied(),
            history,
            train_counts,
            used_days: HashSet::new(),
            records: Vec::new(),
            rng: rng::stream(seed, Stage::Injection, agent_id as u64),
            router,
            clock,
            plan,
        };
        let budget = ((target_rows - labeled_total as f64) / (n_select - done) as f64).max(1.0);
        let recurring = done < n_recurring;
        let first = if recurring {
            let template = if plan.frequency_shift && inj.rng.random_bool(0.5) {
                Template::FrequencyShift
            } else {
                Template::NovelVisit
            };
            inj.recurring(template)
        } else if inj.non_recurring() {
            Ok(())
        } else {
            Err("no feasible insertion".to_string())
        };
        if let Err(reason) = first {
            skipped.push((agent_id, reason));
            continue;
        }
        // Further events of the same kind until the agent's share of labeled
        // rows is reached; a recurring agent falls back to one-off events when
        // no further series fits.
        let mut guard = 0;
        while (inj.labeled() as f64) + 1.5 < budget && guard < 40 {
            guard += 1;
            let added = (recurring && inj.recurring(Template::NovelVisit).is_ok()) || inj.non_recurring();
            if !added {
                break;
            }
        }
        labeled_total += inj.labeled();
        done += 1;
        records.extend(inj.records);
        test_by.insert(agent_id, inj.seq);
    }

    let anomalous: Vec<Staypoint> = test_by.into_values().flatten().collect();
    let labeled = anomalous.iter().filter(|s| s.anomaly()).count();
    let touched: HashSet<AgentId> = anomalous.iter().filter(|s| s.anomaly()).map(|s| s.agent_id).collect();
    let outcome = InjectionOutcome {
        achieved_agent_prevalence: if n_agents == 0 { 0.0 } else { touched.len() as f64 / n_agents as f64 },
        achieved_staypoint_prevalence: if anomalous.is_empty() { 0.0 } else { labeled as f64 / anomalous.len() as f64 },
        anomalous,
        records,
        skipped,
        n_agents,
        anomalous_agents: touched.len(),
        labeled_staypoints: labeled,
    };
    let details = format!(
        "{} agents, {} test rows, {} anomalous agents, {} labeled rows, {} agents skipped",
        n_agents,
        n_rows,
        outcome.anomalous_agents,
        labeled,
        outcome.skipped.len()
    );
    for (what, achieved, target) in [
        ("agent", outcome.achieved_agent_prevalence, plan.target_agent_prevalence),
        ("staypoint", outcome.achieved_staypoint_prevalence, plan.target_staypoint_prevalence),
    ] {
        if (achieved - target).abs() > plan.tolerance * target {
            return Err(InjectError::TargetsUnreachable { what, achieved, target, tolerance: plan.tolerance, details });
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ActivitySet, PoiRecord};
    use crate::geo::LatLon;
    use crate::routing::TravelTimeOracle;
    use crate::world::{PoiCatalog, RawEdge, RoadGraph};
    use std::sync::Arc;

    /// Every POI sits on the same node, so each trip is pure padding: 40 minutes.
    fn fixture() -> (TravelTimeOracle, PoiCatalog) {
        let a = LatLon::new(34.0, -118.0);
        let b = a.offset_km(0.0, 0.5);
        let g = RoadGraph::from_raw_edges(&[
            RawEdge { u: 0, v: 1, at_u: a, at_v: b, length_m: 1.0, speed_mps: 1.0 },
            RawEdge { u: 1, v: 0, at_u: b, at_v: a, length_m: 1.0, speed_mps: 1.0 },
        ])
        .unwrap();
        let oracle = TravelTimeOracle::new(Arc::new(g)).with_padding(1200.0);
        let rec = |id, types: &[ActivityType]| PoiRecord {
            poi_id: id,
            name: String::new(),
            latitude: a.lat,
            longitude: a.lon,
            act_types: ActivitySet::of(types),
        };
        let catalog = PoiCatalog::from_records(vec![
            rec(1, &[ActivityType::Home, ActivityType::Visit, ActivityType::DropOff]),
            rec(2, &[ActivityType::School]),
            rec(3, &[ActivityType::EatOut, ActivityType::Work]),
        ])
        .unwrap();
        (oracle, catalog)
    }

    fn t(day: u32, h: u32, m: u32) -> Timestamp {
        Timestamp::local(2024, 1, day, h, m, 0)
    }

    #[test]
    fn pair_insertion_trims_both_neighbours() {
        // Home until 07:17, school 07:33-15:00; insert 02:28-13:19 with 40-minute trips.
        let (oracle, catalog) = fixture();
        let router = PoiRouter::new(&oracle, &catalog);
        let clock = SimClock::default();
        let mut seq = vec![Staypoint::new(5, 1, t(29, 0, 0), t(29, 7, 17)), Staypoint::new(5, 2, t(29, 7, 33), t(29, 15, 0))];
        let ins = try_insert(&mut seq, 3, t(29, 2, 28), t(29, 13, 19), &router, &clock).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq[0].end, t(29, 1, 48));
        assert_eq!((seq[1].start, seq[1].end, seq[1].label), (t(29, 2, 28), t(29, 13, 19), AnomalyLabel::Injected));
        assert_eq!(seq[2].start, t(29, 13, 59));
        assert_eq!(seq[0].label, AnomalyLabel::Modified);
        assert_eq!(seq[2].label, AnomalyLabel::Modified);
        assert_eq!(ins.modified.len(), 2);
    }

    #[test]
    fn all_day_stay_is_split_around_the_visit() {
        let (oracle, catalog) = fixture();
        let router = PoiRouter::new(&oracle, &catalog);
        let clock = SimClock::default();
        let mut seq = vec![Staypoint::new(5, 1, t(29, 0, 0), t(30, 0, 0))];
        let ins = try_insert(&mut seq, 3, t(29, 10, 0), t(29, 12, 0), &router, &clock).unwrap();
        let shape: Vec<_> = seq.iter().map(|s| (s.poi_id, s.start, s.end, s.label)).collect();
        assert_eq!(
            shape,
            vec![
                (1, t(29, 0, 0), t(29, 9, 20), AnomalyLabel::Modified),
                (3, t(29, 10, 0), t(29, 12, 0), AnomalyLabel::Injected),
                (1, t(29, 12, 40), t(30, 0, 0), AnomalyLabel::Modified),
            ]
        );
        assert_eq!(ins.modified.len(), 2);
    }

    #[test]
    fn insertion_outside_test_window_is_refused() {
        let (oracle, catalog) = fixture();
        let router = PoiRouter::new(&oracle, &catalog);
        let clock = SimClock::default();
        let mut seq = vec![Staypoint::new(5, 1, t(3, 0, 0), t(4, 0, 0))];
        assert!(try_insert(&mut seq, 3, t(3, 10, 0), t(3, 12, 0), &router, &clock).is_none());
        assert_eq!(seq.len(), 1);
    }

    #[test]
    fn plan_validation() {
        assert!(InjectionPlan::default().validate().is_ok());
        let zero = InjectionPlan { target_agent_prevalence: 0.0, ..Default::default() };
        assert!(matches!(zero.validate(), Err(InjectError::InvalidPlan(_))));
        let one_repeat = InjectionPlan { repeat_min: 1, ..Default::default() };
        assert!(one_repeat.validate().is_err());
        assert_eq!(InjectionPlan::default().anomalous_agent_count(200_000), 382);
        assert_eq!(InjectionPlan::default().anomalous_agent_count(1_000), 2);
    }
}

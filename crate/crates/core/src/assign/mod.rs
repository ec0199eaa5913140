//! Mapping chain entries to concrete POIs, and mobility statistics of the result.

mod stats;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use stats::{
    agent_daily_distance_km, agent_locations_per_day, compute_mobility_stats, radius_of_gyration, MobilityStats,
    Summary,
};

use crate::domain::{ActivityChain, ActivityType, AgentId, AgentRecord, ChainEntry, PoiId, SimClock};
use crate::geo::{haversine_km, CellBuckets, LatLon};
use crate::par;
use crate::rng::{self, Stage};
use crate::routing::ScheduledVisit;
use crate::world::PoiCatalog;

#[derive(Debug, Error, PartialEq)]
pub enum AssignError {
    #[error("no POI is valid for activity type {0}")]
    NoPoisFor(ActivityType),
    #[error("agent {agent_id} has a {activity} entry but no anchor POI for it")]
    MissingAnchor { agent_id: AgentId, activity: ActivityType },
    #[error("chain belongs to agent {chain} but agent record is {agent}")]
    AgentMismatch { chain: AgentId, agent: AgentId },
    #[error("radius of gyration needs at least one point")]
    NoPoints,
}

/// Exploration and preferential-return parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EprParams {
    pub rho: f64,
    pub gamma: f64,
    /// Distance-decay exponent for choosing where to explore.
    pub beta: f64,
    /// Distances below this are treated as this, avoiding infinite weights.
    pub min_distance_km: f64,
}

impl Default for EprParams {
    fn default() -> Self {
        Self { rho: 0.6, gamma: 0.21, beta: 1.7, min_distance_km: 0.1 }
    }
}

impl EprParams {
    /// Probability of exploring after `distinct` distinct POIs.
    pub fn explore_probability(&self, distinct: usize) -> f64 {
        (self.rho * (distinct.max(1) as f64).powf(-self.gamma)).clamp(0.0, 1.0)
    }
}

/// An agent's visit history.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentLocationState {
    visit_counts: BTreeMap<PoiId, u64>,
    pub home_poi: PoiId,
    pub work_poi: Option<PoiId>,
}

impl AgentLocationState {
    pub fn new(agent: &AgentRecord) -> Self {
        Self { visit_counts: BTreeMap::new(), home_poi: agent.home_poi, work_poi: agent.work_poi }
    }

    /// State seeded with explicit counts; zero counts are ignored.
    pub fn with_counts(home_poi: PoiId, counts: impl IntoIterator<Item = (PoiId, u64)>) -> Self {
        let visit_counts = counts.into_iter().filter(|(_, n)| *n > 0).collect();
        Self { visit_counts, home_poi, work_poi: None }
    }

    pub fn record(&mut self, poi: PoiId) {
        *self.visit_counts.entry(poi).or_insert(0) += 1;
    }

    pub fn count(&self, poi: PoiId) -> u64 {
        self.visit_counts.get(&poi).copied().unwrap_or(0)
    }

    pub fn distinct(&self) -> usize {
        self.visit_counts.len()
    }

    pub fn total_visits(&self) -> u64 {
        self.visit_counts.values().sum()
    }

    pub fn visit_counts(&self) -> &BTreeMap<PoiId, u64> {
        &self.visit_counts
    }
}

fn pick_weighted<R: Rng>(items: &[(PoiId, f64)], rng: &mut R) -> Option<PoiId> {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    if items.is_empty() || total <= 0.0 {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    for (id, w) in items {
        u -= w;
        if u < 0.0 {
            return Some(*id);
        }
    }
    items.last().map(|(id, _)| *id)
}

/// Picks among `candidates` with probability proportional to past visits.
pub fn preferential_return<R: Rng>(
    state: &AgentLocationState,
    candidates: impl IntoIterator<Item = PoiId>,
    rng: &mut R,
) -> Option<PoiId> {
    let weighted: Vec<(PoiId, f64)> =
        candidates.into_iter().map(|p| (p, state.count(p) as f64)).filter(|(_, w)| *w > 0.0).collect();
    pick_weighted(&weighted, rng)
}

/// Picks an unvisited candidate with weight `distance^-beta` from `from`.
pub fn explore<R: Rng>(
    from: LatLon,
    candidates: impl IntoIterator<Item = PoiId>,
    catalog: &PoiCatalog,
    params: &EprParams,
    rng: &mut R,
) -> Option<PoiId> {
    let weighted: Vec<(PoiId, f64)> = candidates
        .into_iter()
        .map(|p| (p, gravity_weight(from, catalog.location(p), params)))
        .collect();
    pick_weighted(&weighted, rng)
}

fn gravity_weight(from: LatLon, to: LatLon, params: &EprParams) -> f64 {
    gravity_weight_km(haversine_km(from, to), params)
}

const MAX_REJECTIONS: usize = 256;

/// Exact draw from the same law as [`explore`] by rejection: a cell is picked
/// with weight `members * bound`, where `bound` is the gravity weight at the
/// cell's nearest box point, then a member uniformly, accepted with
/// probability `weight / bound`. `None` after too many rejections.
fn explore_bucketed<R: Rng>(
    from: LatLon,
    ids: &[PoiId],
    points: &[LatLon],
    cells: &CellBuckets,
    excluded: &dyn Fn(PoiId) -> bool,
    params: &EprParams,
    rng: &mut R,
) -> Option<PoiId> {
    let bounds: Vec<f64> = cells
        .cells
        .iter()
        // 0.99 keeps the lat/lon box clamp a strict lower bound on distance.
        .map(|c| gravity_weight_km(0.99 * haversine_km(from, c.clamp(from)), params))
        .collect();
    let mut cumulative = Vec::with_capacity(bounds.len());
    let mut total = 0.0;
    for (c, b) in cells.cells.iter().zip(&bounds) {
        total += c.members.len() as f64 * b;
        cumulative.push(total);
    }
    for _ in 0..MAX_REJECTIONS {
        let u = rng.random::<f64>() * total;
        let k = cumulative.partition_point(|c| *c <= u).min(cumulative.len() - 1);
        let cell = &cells.cells[k];
        let m = cell.members[rng.random_range(0..cell.members.len())] as usize;
        let accept = rng.random::<f64>() * bounds[k];
        if excluded(ids[m]) {
            continue;
        }
        if accept < gravity_weight(from, points[m], params) {
            return Some(ids[m]);
        }
    }
    None
}

fn gravity_weight_km(d: f64, params: &EprParams) -> f64 {
    d.max(params.min_distance_km).powf(-params.beta)
}

/// Chooses a POI for one non-anchored activity and records the visit.
pub fn choose_poi<R: Rng>(
    activity: ActivityType,
    current: LatLon,
    catalog: &PoiCatalog,
    state: &mut AgentLocationState,
    params: &EprParams,
    rng: &mut R,
) -> Result<PoiId, AssignError> {
    let home = state.home_poi;
    let ids = catalog.by_activity(activity);
    let n_valid = ids.len() - usize::from(catalog.is_valid_for(home, activity));
    if n_valid == 0 {
        return Err(AssignError::NoPoisFor(activity));
    }
    let visited: Vec<(PoiId, f64)> = state
        .visit_counts
        .iter()
        .filter(|(p, _)| **p != home && catalog.is_valid_for(**p, activity))
        .map(|(p, n)| (*p, *n as f64))
        .collect();
    let has_fresh = visited.len() < n_valid;
    let explore_now = visited.is_empty() || (has_fresh && rng.random_bool(params.explore_probability(state.distinct())));
    let chosen = if explore_now {
        let points = catalog.activity_points(activity);
        let excluded = |p: PoiId| p == home || state.visit_counts.contains_key(&p);
        let sampled = match catalog.activity_cells(activity) {
            Some(cells) => explore_bucketed(current, ids, points, cells, &excluded, params, rng),
            None => None,
        };
        sampled.or_else(|| {
            let weighted: Vec<(PoiId, f64)> = ids
                .iter()
                .zip(points)
                .filter(|(p, _)| !excluded(**p))
                .map(|(p, at)| (*p, gravity_weight(current, *at, params)))
                .collect();
            pick_weighted(&weighted, rng)
        })
    } else {
        pick_weighted(&visited, rng)
    }
    .ok_or(AssignError::NoPoisFor(activity))?;
    state.record(chosen);
    Ok(chosen)
}

/// A chain entry with its POI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedEntry {
    pub entry: ChainEntry,
    pub poi_id: PoiId,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct AssignedChain {
    pub agent_id: AgentId,
    pub entries: Vec<AssignedEntry>,
}

/// Assigns every entry of `chain`: Home and Work go to the agent's anchors,
/// everything else through exploration or preferential return.
pub fn assign_pois<R: Rng>(
    chain: &ActivityChain,
    agent: &AgentRecord,
    catalog: &PoiCatalog,
    state: &mut AgentLocationState,
    params: &EprParams,
    rng: &mut R,
) -> Result<AssignedChain, AssignError> {
    if chain.agent_id != agent.agent_id {
        return Err(AssignError::AgentMismatch { chain: chain.agent_id, agent: agent.agent_id });
    }
    let mut current = catalog.location(agent.home_poi);
    let mut entries = Vec::with_capacity(chain.entries.len());
    for e in &chain.entries {
        let poi_id = match e.activity {
            ActivityType::Home => {
                state.record(agent.home_poi);
                agent.home_poi
            }
            ActivityType::Work => {
                let w = agent
                    .work_poi
                    .ok_or(AssignError::MissingAnchor { agent_id: agent.agent_id, activity: ActivityType::Work })?;
                state.record(w);
                w
            }
            other => choose_poi(other, current, catalog, state, params, rng)?,
        };
        current = catalog.location(poi_id);
        entries.push(AssignedEntry { entry: *e, poi_id });
    }
    Ok(AssignedChain { agent_id: agent.agent_id, entries })
}

/// Assigns all chains, each agent drawing from its own stream.
pub fn assign_all(
    chains: &[ActivityChain],
    agents: &[AgentRecord],
    catalog: &PoiCatalog,
    params: &EprParams,
    seed: u64,
) -> Result<Vec<AssignedChain>, AssignError> {
    let by_id: std::collections::HashMap<AgentId, &AgentRecord> = agents.iter().map(|a| (a.agent_id, a)).collect();
    par::map(chains, |chain| {
        let agent = by_id
            .get(&chain.agent_id)
            .ok_or(AssignError::AgentMismatch { chain: chain.agent_id, agent: AgentId::MAX })?;
        let mut rng = rng::stream(seed, Stage::Assignment, chain.agent_id as u64);
        let mut state = AgentLocationState::new(agent);
        assign_pois(chain, agent, catalog, &mut state, params, &mut rng)
    })
    .into_iter()
    .collect()
}

/// Absolute scheduled times for an assigned chain.
pub fn scheduled_visits(chain: &AssignedChain, clock: &SimClock) -> Vec<ScheduledVisit> {
    chain
        .entries
        .iter()
        .map(|a| {
            let midnight = clock.day_start(a.entry.day);
            ScheduledVisit {
                poi_id: a.poi_id,
                start: midnight.plus(a.entry.start_min as i64 * 60),
                end: midnight.plus(a.entry.end_min as i64 * 60),
            }
        })
        .collect()
}

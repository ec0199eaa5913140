//! Anomaly scorers over staypoint sequences.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AgentId, PoiId, Staypoint};
use crate::geo::LatLon;
use crate::par;

/// Train rate assumed for a POI the agent never visited in train.
pub const UNSEEN_TRAIN_RATE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("unknown detector {0:?} (expected visit_rate or novelty)")]
    UnknownDetector(String),
    #[error("unknown score level {0:?}")]
    UnknownLevel(String),
    #[error("cell size must be positive, got {0}")]
    BadCellSize(f64),
    #[error("point {index} has non-finite coordinates")]
    NonFinite { index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Staypoint,
    Agent,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Staypoint => "staypoint",
            Level::Agent => "agent",
        })
    }
}

impl FromStr for Level {
    type Err = DetectError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "staypoint" => Ok(Level::Staypoint),
            "agent" => Ok(Level::Agent),
            other => Err(DetectError::UnknownLevel(other.to_string())),
        }
    }
}

/// One score row. `staypoint_index` is the position within the agent's test
/// sequence and is `None` for agent-level rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub level: Level,
    pub agent_id: AgentId,
    pub staypoint_index: Option<usize>,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    VisitRate,
    Novelty,
}

impl Detector {
    pub fn name(self) -> &'static str {
        match self {
            Detector::VisitRate => "visit_rate",
            Detector::Novelty => "novelty",
        }
    }

    pub fn score(self, train: &[Staypoint], test: &[Staypoint]) -> Vec<ScoredItem> {
        match self {
            Detector::VisitRate => visit_rate_scores(train, test),
            Detector::Novelty => novelty_scores(train, test),
        }
    }
}

impl FromStr for Detector {
    type Err = DetectError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "visit_rate" | "visit-rate" => Ok(Detector::VisitRate),
            "novelty" => Ok(Detector::Novelty),
            other => Err(DetectError::UnknownDetector(other.to_string())),
        }
    }
}

/// `|train - test| / sqrt(train)`, with an unseen train count replaced by
/// [`UNSEEN_TRAIN_RATE`].
pub fn visit_rate_score(train_count: u64, test_count: u64) -> f64 {
    let train = if train_count == 0 { UNSEEN_TRAIN_RATE } else { train_count as f64 };
    (train - test_count as f64).abs() / train.sqrt()
}

/// Visit counts per (agent, POI) in the train and test windows. Both windows
/// span four weeks, so counts compare directly.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VisitRateTable {
    counts: HashMap<(AgentId, PoiId), (u64, u64)>,
}

impl VisitRateTable {
    pub fn build(train: &[Staypoint], test: &[Staypoint]) -> Self {
        let mut counts: HashMap<(AgentId, PoiId), (u64, u64)> = HashMap::new();
        for s in train {
            counts.entry((s.agent_id, s.poi_id)).or_default().0 += 1;
        }
        for s in test {
            counts.entry((s.agent_id, s.poi_id)).or_default().1 += 1;
        }
        Self { counts }
    }

    pub fn get(&self, agent: AgentId, poi: PoiId) -> (u64, u64) {
        self.counts.get(&(agent, poi)).copied().unwrap_or((0, 0))
    }

    pub fn score(&self, agent: AgentId, poi: PoiId) -> f64 {
        let (tr, te) = self.get(agent, poi);
        visit_rate_score(tr, te)
    }
}

/// Each value replaced by the maximum of itself and its immediate neighbours.
pub fn smooth_neighbor_max(scores: &[f64]) -> Vec<f64> {
    (0..scores.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(scores.len() - 1);
            scores[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Row indices of `seq` grouped by agent, in order of first appearance.
fn group_by_agent(seq: &[Staypoint]) -> Vec<(AgentId, Vec<usize>)> {
    let mut order: Vec<(AgentId, Vec<usize>)> = Vec::new();
    let mut slot: HashMap<AgentId, usize> = HashMap::new();
    for (i, s) in seq.iter().enumerate() {
        let k = *slot.entry(s.agent_id).or_insert_with(|| {
            order.push((s.agent_id, Vec::new()));
            order.len() - 1
        });
        order[k].1.push(i);
    }
    order
}

fn smoothed_rows(test: &[Staypoint], raw: impl Fn(&Staypoint) -> f64 + Sync) -> Vec<ScoredItem> {
    let groups = group_by_agent(test);
    par::map(&groups, |(agent_id, rows)| {
        let own: Vec<f64> = rows.iter().map(|&i| raw(&test[i])).collect();
        smooth_neighbor_max(&own)
            .into_iter()
            .enumerate()
            .map(|(k, score)| ScoredItem { level: Level::Staypoint, agent_id: *agent_id, staypoint_index: Some(k), score })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Visit-rate change scores for every test staypoint, smoothed over
/// neighbours within each agent's time-ordered test sequence.
pub fn visit_rate_scores(train: &[Staypoint], test: &[Staypoint]) -> Vec<ScoredItem> {
    let table = VisitRateTable::build(train, test);
    smoothed_rows(test, |s| table.score(s.agent_id, s.poi_id))
}

/// 1 for test staypoints at a POI the agent never visited in train, else 0,
/// with the same neighbour smoothing.
pub fn novelty_scores(train: &[Staypoint], test: &[Staypoint]) -> Vec<ScoredItem> {
    let seen: HashSet<(AgentId, PoiId)> = train.iter().map(|s| (s.agent_id, s.poi_id)).collect();
    smoothed_rows(test, |s| if seen.contains(&(s.agent_id, s.poi_id)) { 0.0 } else { 1.0 })
}

/// Maximum staypoint score per agent. Agents listed in `all_agents` without
/// any staypoint row score 0.
pub fn aggregate_to_agents(items: &[ScoredItem], all_agents: &[AgentId]) -> Vec<ScoredItem> {
    let mut best: HashMap<AgentId, f64> = all_agents.iter().map(|a| (*a, 0.0)).collect();
    let mut order: Vec<AgentId> = all_agents.to_vec();
    for it in items.iter().filter(|it| it.level == Level::Staypoint) {
        match best.get_mut(&it.agent_id) {
            Some(b) => *b = b.max(it.score),
            None => {
                best.insert(it.agent_id, it.score);
                order.push(it.agent_id);
            }
        }
    }
    order
        .into_iter()
        .map(|agent_id| ScoredItem { level: Level::Agent, agent_id, staypoint_index: None, score: best[&agent_id] })
        .collect()
}

const GRID_COLS_MAX: u64 = 1 << 32;

/// Square-cell ids from floor division of latitude and longitude.
pub fn gridify(points: &[LatLon], cell_size_deg: f64) -> Result<Vec<u64>, DetectError> {
    if !(cell_size_deg.is_finite() && cell_size_deg > 0.0) {
        return Err(DetectError::BadCellSize(cell_size_deg));
    }
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            if !(p.lat.is_finite() && p.lon.is_finite()) {
                return Err(DetectError::NonFinite { index });
            }
            let row = ((p.lat + 90.0) / cell_size_deg).floor() as u64;
            let col = ((p.lon + 180.0) / cell_size_deg).floor() as u64;
            Ok(row * GRID_COLS_MAX + col)
        })
        .collect()
}

/// South-west corner of a cell produced by [`gridify`].
pub fn cell_corner(cell: u64, cell_size_deg: f64) -> LatLon {
    let (row, col) = (cell / GRID_COLS_MAX, cell % GRID_COLS_MAX);
    LatLon::new(row as f64 * cell_size_deg - 90.0, col as f64 * cell_size_deg - 180.0)
}

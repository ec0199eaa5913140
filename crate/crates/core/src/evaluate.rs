//! Ranking metrics, label derivation and data corruptions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{Level, ScoredItem};
use crate::domain::{AgentId, Staypoint};
use crate::geo::LatLon;
use crate::world::PoiCatalog;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("need at least one positive and one negative label")]
    SingleClass,
    #[error("need at least one positive label")]
    NoPositives,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("agent sets differ: {only_truth} only in truth, {only_anomalous} only in anomalous")]
    AgentSetMismatch { only_truth: usize, only_anomalous: usize },
    #[error("no score for {level} row agent {agent_id} index {index:?}")]
    MissingScore { level: Level, agent_id: AgentId, index: Option<usize> },
    #[error("unknown corruption {0:?} (expected temporal, missing, id_switch or spatial)")]
    UnknownCorruption(String),
    #[error("corruption magnitude must be finite and non-negative, got {0}")]
    BadMagnitude(f64),
    #[error("spatial corruption needs the POI catalog")]
    NeedsCatalog,
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(*s));
    }
    let pos = labels.iter().filter(|l| **l).count();
    Ok((pos, labels.len() - pos))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from mid-ranks.
pub fn aucroc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of positives, using doubled mid-ranks to stay in integers.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += twice_mid * tied_pos;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

/// Area under the precision-recall step curve with tied scores entering the
/// ranking together.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    let (pos, _) = check(scores, labels)?;
    if pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let group_pos = order[i..=j].iter().filter(|&&k| labels[k]).count();
        tp += group_pos;
        seen += j - i + 1;
        ap += (tp as f64 / seen as f64) * (group_pos as f64 / pos as f64);
        i = j + 1;
    }
    Ok(ap)
}

/// When an agent counts as anomalous.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentThreshold {
    /// At least this many anomalous staypoints.
    AtLeast(usize),
    /// At least this share of the agent's staypoints.
    Proportion(f64),
}

impl Default for AgentThreshold {
    fn default() -> Self {
        AgentThreshold::AtLeast(1)
    }
}

impl AgentThreshold {
    pub fn is_anomalous(&self, anomalous: usize, total: usize) -> bool {
        match *self {
            AgentThreshold::AtLeast(k) => anomalous >= k.max(1),
            AgentThreshold::Proportion(p) => total > 0 && anomalous > 0 && anomalous as f64 / total as f64 >= p,
        }
    }
}

/// Anomaly flags of the anomalous file, in row order.
pub fn staypoint_labels(anomalous: &[Staypoint]) -> Vec<bool> {
    anomalous.iter().map(Staypoint::anomaly).collect()
}

/// Per-agent labels, ordered by agent id. Both files must cover the same agents.
pub fn agent_labels(
    truth: &[Staypoint],
    anomalous: &[Staypoint],
    threshold: AgentThreshold,
) -> Result<Vec<(AgentId, bool)>, EvalError> {
    let truth_agents: std::collections::BTreeSet<AgentId> = truth.iter().map(|s| s.agent_id).collect();
    let mut counts: BTreeMap<AgentId, (usize, usize)> = BTreeMap::new();
    for s in anomalous {
        let c = counts.entry(s.agent_id).or_default();
        c.0 += s.anomaly() as usize;
        c.1 += 1;
    }
    let only_truth = truth_agents.iter().filter(|a| !counts.contains_key(a)).count();
    let only_anomalous = counts.keys().filter(|a| !truth_agents.contains(a)).count();
    if only_truth + only_anomalous > 0 {
        return Err(EvalError::AgentSetMismatch { only_truth, only_anomalous });
    }
    Ok(counts.into_iter().map(|(a, (bad, total))| (a, threshold.is_anomalous(bad, total))).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub level: Level,
    pub method: String,
    pub n_items: usize,
    pub n_positive: usize,
    pub prevalence: f64,
    pub ap: f64,
    pub aucroc: f64,
}

impl EvalResult {
    pub fn from_scores(level: Level, method: &str, scores: &[f64], labels: &[bool]) -> Result<Self, EvalError> {
        let n_positive = labels.iter().filter(|l| **l).count();
        Ok(Self {
            level,
            method: method.to_string(),
            n_items: labels.len(),
            n_positive,
            prevalence: if labels.is_empty() { 0.0 } else { n_positive as f64 / labels.len() as f64 },
            ap: average_precision(scores, labels)?,
            aucroc: aucroc(scores, labels)?,
        })
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<10} {:<12} {:>12.6} {:>8.4} {:>8.4}",
            self.level.to_string(),
            self.method,
            self.prevalence,
            self.ap,
            self.aucroc
        )
    }
}

/// Header matching [`EvalResult`]'s `Display` columns.
pub const EVAL_TABLE_HEADER: &str = "Level      Method       Prevalence       AP   AUCROC";

/// Scores aligned to the anomalous file's rows: staypoint `k` of an agent is
/// that agent's `k`-th row.
pub fn align_staypoint_scores(scores: &[ScoredItem], anomalous: &[Staypoint]) -> Result<Vec<f64>, EvalError> {
    let lookup: HashMap<(AgentId, usize), f64> = scores
        .iter()
        .filter(|s| s.level == Level::Staypoint)
        .filter_map(|s| s.staypoint_index.map(|k| ((s.agent_id, k), s.score)))
        .collect();
    let mut next_index: HashMap<AgentId, usize> = HashMap::new();
    anomalous
        .iter()
        .map(|s| {
            let k = next_index.entry(s.agent_id).or_insert(0);
            let key = (s.agent_id, *k);
            *k += 1;
            lookup.get(&key).copied().ok_or(EvalError::MissingScore {
                level: Level::Staypoint,
                agent_id: key.0,
                index: Some(key.1),
            })
        })
        .collect()
}

/// Staypoint-level and agent-level results for one scored run.
pub fn evaluate_run(
    method: &str,
    scores: &[ScoredItem],
    truth: &[Staypoint],
    anomalous: &[Staypoint],
    threshold: AgentThreshold,
) -> Result<(EvalResult, EvalResult), EvalError> {
    let sp_scores = align_staypoint_scores(scores, anomalous)?;
    let sp = EvalResult::from_scores(Level::Staypoint, method, &sp_scores, &staypoint_labels(anomalous))?;
    let labels = agent_labels(truth, anomalous, threshold)?;
    let agent_scores: HashMap<AgentId, f64> = match scores.iter().any(|s| s.level == Level::Agent) {
        true => scores.iter().filter(|s| s.level == Level::Agent).map(|s| (s.agent_id, s.score)).collect(),
        false => {
            let ids: Vec<AgentId> = labels.iter().map(|(a, _)| *a).collect();
            crate::detect::aggregate_to_agents(scores, &ids).into_iter().map(|s| (s.agent_id, s.score)).collect()
        }
    };
    let mut a_scores = Vec::with_capacity(labels.len());
    for (agent_id, _) in &labels {
        let s = agent_scores.get(agent_id).copied().ok_or(EvalError::MissingScore {
            level: Level::Agent,
            agent_id: *agent_id,
            index: None,
        })?;
        a_scores.push(s);
    }
    let flags: Vec<bool> = labels.iter().map(|(_, l)| *l).collect();
    let agent = EvalResult::from_scores(Level::Agent, method, &a_scores, &flags)?;
    Ok((sp, agent))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    /// Gaussian noise in minutes on start and end.
    Temporal,
    /// Each row dropped with probability `magnitude`.
    Missing,
    /// Rows swap agent ids with a random row of another agent at rate `magnitude`.
    IdSwitch,
    /// Location displaced by Gaussian noise of `magnitude` km, then snapped to
    /// the nearest POI.
    Spatial,
}

impl FromStr for Corruption {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temporal" => Ok(Corruption::Temporal),
            "missing" => Ok(Corruption::Missing),
            "id_switch" | "id-switch" => Ok(Corruption::IdSwitch),
            "spatial" => Ok(Corruption::Spatial),
            other => Err(EvalError::UnknownCorruption(other.to_string())),
        }
    }
}

/// Sorts each agent's rows by time and resolves overlaps by splitting at the
/// midpoint; rows left without positive length are dropped.
pub fn repair_overlaps(rows: &mut Vec<Staypoint>) {
    rows.sort_by_key(|s| (s.agent_id, s.start, s.end));
    loop {
        let mut changed = false;
        for i in 1..rows.len() {
            let (a, b) = (rows[i - 1], rows[i]);
            if a.agent_id == b.agent_id && b.start < a.end {
                let mid = crate::domain::Timestamp((a.end.0 + b.start.0).div_euclid(2));
                rows[i - 1].end = mid;
                rows[i].start = mid;
                changed = true;
            }
        }
        let before = rows.len();
        rows.retain(|s| s.end > s.start);
        if !changed && rows.len() == before {
            break;
        }
        rows.sort_by_key(|s| (s.agent_id, s.start, s.end));
    }
}

/// Applies one corruption to a multi-agent staypoint table. Magnitude 0 is
/// the identity for every kind.
pub fn apply_corruption<R: Rng>(
    rows: &[Staypoint],
    kind: Corruption,
    magnitude: f64,
    catalog: Option<&PoiCatalog>,
    rng: &mut R,
) -> Result<Vec<Staypoint>, EvalError> {
    if !(magnitude.is_finite() && magnitude >= 0.0) {
        return Err(EvalError::BadMagnitude(magnitude));
    }
    if kind == Corruption::Spatial && catalog.is_none() {
        return Err(EvalError::NeedsCatalog);
    }
    if magnitude == 0.0 {
        return Ok(rows.to_vec());
    }
    let mut out = rows.to_vec();
    match kind {
        Corruption::Temporal => {
            let noise = Normal::new(0.0, magnitude * 60.0).expect("positive sd");
            for s in &mut out {
                let start = s.start.plus(noise.sample(rng).round() as i64);
                let end = s.end.plus(noise.sample(rng).round() as i64);
                s.start = start.min(end);
                s.end = start.max(end);
            }
            repair_overlaps(&mut out);
        }
        Corruption::Missing => out.retain(|_| !rng.random_bool(magnitude.min(1.0))),
        Corruption::IdSwitch => {
            let mut idx: Vec<usize> = (0..out.len()).collect();
            idx.shuffle(rng);
            for pair in idx.chunks_exact(2) {
                let (i, j) = (pair[0], pair[1]);
                if out[i].agent_id != out[j].agent_id && rng.random_bool(magnitude.min(1.0)) {
                    let a = out[i].agent_id;
                    out[i].agent_id = out[j].agent_id;
                    out[j].agent_id = a;
                }
            }
            repair_overlaps(&mut out);
        }
        Corruption::Spatial => {
            let catalog = catalog.expect("checked above");
            let noise = Normal::new(0.0, magnitude).expect("positive sd");
            for s in &mut out {
                let at: LatLon = catalog.location(s.poi_id).offset_km(noise.sample(rng), noise.sample(rng));
                if let Some((p, _)) = catalog.nearest_where(at, |_| true) {
                    s.poi_id = p;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aucroc_examples() {
        assert_eq!(aucroc(&[0.9, 0.8, 0.7, 0.1], &[true, false, true, false]).unwrap(), 0.75);
        assert_eq!(aucroc(&[0.3, 0.2, 0.9, 0.1], &[true, false, true, false]).unwrap(), 1.0);
        assert_eq!(aucroc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert_eq!(aucroc(&[0.5, 0.4], &[true, true]), Err(EvalError::SingleClass));
    }

    #[test]
    fn ap_examples() {
        let ap = average_precision(&[0.9, 0.8, 0.7, 0.1], &[true, false, true, false]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(average_precision(&[0.9, 0.8], &[false, false]), Err(EvalError::NoPositives));
        // All tied: precision is the prevalence.
        assert_eq!(average_precision(&[1.0; 4], &[true, false, false, false]).unwrap(), 0.25);
    }

    #[test]
    fn agent_threshold_rules() {
        assert!(!AgentThreshold::AtLeast(1).is_anomalous(0, 30));
        assert!(AgentThreshold::AtLeast(1).is_anomalous(1, 30));
        assert!(!AgentThreshold::Proportion(0.1).is_anomalous(2, 30));
        assert!(AgentThreshold::Proportion(0.1).is_anomalous(3, 30));
    }

    #[test]
    fn unknown_corruption_is_rejected() {
        assert_eq!("blur".parse::<Corruption>(), Err(EvalError::UnknownCorruption("blur".into())));
    }
}

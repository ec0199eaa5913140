//! Browser bindings: simulate a small city, score it, and inspect one agent.
//!
//! Every export takes and returns plain values or JSON strings. Errors come
//! back as `{"error": "..."}` so the page never has to catch a JS exception.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use staysim_core::activity::ActivityModel;
use staysim_core::detect::{Detector, Level, VisitRateTable};
use staysim_core::evaluate::{evaluate_run, AgentThreshold, EvalResult};
use staysim_core::sim::{run, Dataset, SimConfig};
use staysim_core::{ActivityType, AgentId, PoiId};

pub const MAX_AGENTS: usize = 400;

struct Session {
    ds: Dataset,
    scores: HashMap<(AgentId, usize), f64>,
}

thread_local! {
    static SESSION: RefCell<Option<Session>> = const { RefCell::new(None) };
}

#[derive(Serialize)]
struct Poi {
    id: PoiId,
    lat: f64,
    lon: f64,
    residence: bool,
}

#[derive(Serialize)]
struct AgentSummary {
    id: AgentId,
    anomalous: bool,
    max_score: f64,
}

#[derive(Serialize)]
struct Summary {
    n_agents: usize,
    seed: u64,
    train_rows: usize,
    test_rows: usize,
    labeled_rows: usize,
    anomalous_agents: usize,
    bbox: [f64; 4],
    pois: Vec<Poi>,
    agents: Vec<AgentSummary>,
    results: Vec<EvalResult>,
}

fn error(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

fn simulate_inner(
    n_agents: usize,
    seed: u64,
    agent_prevalence: f64,
    staypoint_prevalence: f64,
) -> Result<(Summary, Session), String> {
    if !(10..=MAX_AGENTS).contains(&n_agents) {
        return Err(format!("agents must be between 10 and {MAX_AGENTS}"));
    }
    let mut cfg = SimConfig::for_agents(n_agents, seed);
    cfg.plan.target_agent_prevalence = agent_prevalence;
    cfg.plan.target_staypoint_prevalence = staypoint_prevalence;
    let ds = run(&cfg, &ActivityModel::default()).map_err(|e| e.to_string())?;
    let (train, test, anomalous) = (&ds.realization.train, &ds.realization.test, &ds.injection.anomalous);

    let mut results = Vec::new();
    let mut scores = HashMap::new();
    for detector in [Detector::VisitRate, Detector::Novelty] {
        let items = detector.score(train, anomalous);
        let (sp, agent) = evaluate_run(detector.name(), &items, test, anomalous, AgentThreshold::default())
            .map_err(|e| e.to_string())?;
        results.push(sp);
        results.push(agent);
        if detector == Detector::VisitRate {
            scores = items
                .iter()
                .filter(|s| s.level == Level::Staypoint)
                .filter_map(|s| s.staypoint_index.map(|k| ((s.agent_id, k), s.score)))
                .collect();
        }
    }

    let residence = ActivityType::Home;
    let pois: Vec<Poi> = ds
        .world
        .catalog
        .records()
        .iter()
        .map(|p| Poi { id: p.poi_id, lat: p.latitude, lon: p.longitude, residence: p.act_types.contains(residence) })
        .collect();
    let bbox = pois.iter().fold([f64::MAX, f64::MAX, f64::MIN, f64::MIN], |b, p| {
        [b[0].min(p.lat), b[1].min(p.lon), b[2].max(p.lat), b[3].max(p.lon)]
    });

    let mut max_score: HashMap<AgentId, f64> = HashMap::new();
    for ((agent, _), s) in &scores {
        let m = max_score.entry(*agent).or_insert(0.0);
        *m = m.max(*s);
    }
    let flagged: std::collections::HashSet<AgentId> =
        anomalous.iter().filter(|s| s.anomaly()).map(|s| s.agent_id).collect();
    let agents = ds
        .world
        .agents
        .iter()
        .map(|a| AgentSummary {
            id: a.agent_id,
            anomalous: flagged.contains(&a.agent_id),
            max_score: max_score.get(&a.agent_id).copied().unwrap_or(0.0),
        })
        .collect();

    let summary = Summary {
        n_agents,
        seed,
        train_rows: train.len(),
        test_rows: test.len(),
        labeled_rows: ds.injection.labeled_staypoints,
        anomalous_agents: ds.injection.anomalous_agents,
        bbox,
        pois,
        agents,
        results,
    };
    Ok((summary, Session { ds, scores }))
}

/// Runs the whole pipeline and keeps the result for [`agent_timeline`].
#[wasm_bindgen]
pub fn simulate(n_agents: usize, seed: u32, agent_prevalence: f64, staypoint_prevalence: f64) -> String {
    match simulate_inner(n_agents, seed as u64, agent_prevalence, staypoint_prevalence) {
        Ok((summary, session)) => {
            SESSION.with(|s| *s.borrow_mut() = Some(session));
            serde_json::to_string(&summary).unwrap_or_else(error)
        }
        Err(e) => error(e),
    }
}

/// Visit-rate score for one (agent, POI) pair before smoothing.
#[wasm_bindgen]
pub fn visit_rate(train_count: u32, test_count: u32) -> f64 {
    staysim_core::detect::visit_rate_score(train_count as u64, test_count as u64)
}

fn timeline_inner(session: &Session, agent: AgentId) -> Result<serde_json::Value, String> {
    let ds = &session.ds;
    let start = ds.clock.train_start().seconds();
    let table = VisitRateTable::build(&ds.realization.train, &ds.injection.anomalous);
    let hours = |t: staysim_core::Timestamp| (t.seconds() - start) as f64 / 3600.0;
    let train: Vec<_> = ds
        .realization
        .train
        .iter()
        .filter(|s| s.agent_id == agent)
        .map(|s| json!({ "poi": s.poi_id, "start_h": hours(s.start), "end_h": hours(s.end) }))
        .collect();
    let test: Vec<_> = ds
        .injection
        .anomalous
        .iter()
        .filter(|s| s.agent_id == agent)
        .enumerate()
        .map(|(k, s)| {
            let (n_train, n_test) = table.get(agent, s.poi_id);
            json!({
                "poi": s.poi_id,
                "start": s.start.to_string(),
                "end": s.end.to_string(),
                "start_h": hours(s.start),
                "end_h": hours(s.end),
                "anomaly_type": s.label as u8,
                "train_visits": n_train,
                "test_visits": n_test,
                "score": session.scores.get(&(agent, k)).copied().unwrap_or(0.0),
            })
        })
        .collect();
    if train.is_empty() && test.is_empty() {
        return Err(format!("no staypoints for agent {agent}"));
    }
    Ok(json!({
        "agent_id": agent,
        "test_start_h": hours(ds.clock.test_start()),
        "end_h": hours(ds.clock.test_end()),
        "train": train,
        "test": test,
    }))
}

/// Train and test staypoints of one agent, with counts and scores per test row.
#[wasm_bindgen]
pub fn agent_timeline(agent_id: u32) -> String {
    SESSION.with(|s| match s.borrow().as_ref() {
        None => error("run a simulation first"),
        Some(session) => timeline_inner(session, agent_id as AgentId).map(|v| v.to_string()).unwrap_or_else(error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_city_round_trip() {
        let out: serde_json::Value = serde_json::from_str(&simulate(120, 3, 0.02, 0.002)).unwrap();
        assert!(out.get("error").is_none(), "{out}");
        assert_eq!(out["agents"].as_array().unwrap().len(), 120);
        assert_eq!(out["results"].as_array().unwrap().len(), 4);
        let flagged = out["agents"].as_array().unwrap().iter().find(|a| a["anomalous"] == true).unwrap();
        let id = flagged["id"].as_u64().unwrap() as u32;
        let t: serde_json::Value = serde_json::from_str(&agent_timeline(id)).unwrap();
        assert!(t["test"].as_array().unwrap().iter().any(|r| r["anomaly_type"] != 0));
    }

    #[test]
    fn bad_inputs_come_back_as_errors() {
        let out: serde_json::Value = serde_json::from_str(&simulate(5, 1, 0.02, 0.002)).unwrap();
        assert!(out["error"].is_string());
        assert_eq!(visit_rate(0, 1), staysim_core::detect::visit_rate_score(0, 1));
    }
}

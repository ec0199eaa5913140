use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{PoiCatalog, WorldError};
use crate::domain::{ActivityType, AgeBand, AgentId, AgentRecord, Demographics, PoiId};
use crate::par;
use crate::rng::{self, Stage};
use crate::routing::TravelTimeOracle;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationConfig {
    pub worker_fraction: f64,
    /// Agents per residence before a residence is considered full.
    pub max_occupancy: usize,
    /// Median of the target one-way network commute, minutes.
    pub commute_median_min: f64,
    /// Log-space spread of target commutes.
    pub commute_sigma: f64,
    /// A worker's workplace is drawn from this many best-matching candidates.
    pub commute_choice_pool: usize,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            worker_fraction: 0.6,
            max_occupancy: 4,
            commute_median_min: 30.0,
            commute_sigma: 0.45,
            commute_choice_pool: 5,
        }
    }
}

const WORKER_AGE_WEIGHTS: [f64; 5] = [0.0, 0.32, 0.43, 0.2, 0.05];
const NON_WORKER_AGE_WEIGHTS: [f64; 5] = [0.38, 0.14, 0.1, 0.1, 0.28];
const HOUSEHOLD_SIZE_WEIGHTS: [f64; 6] = [0.26, 0.31, 0.17, 0.15, 0.07, 0.04];

fn pick_weighted<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 && *w > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn sample_demographics<R: Rng>(worker_fraction: f64, rng: &mut R) -> Demographics {
    let worker = rng.random_bool(worker_fraction.clamp(0.0, 1.0));
    let weights = if worker { &WORKER_AGE_WEIGHTS } else { &NON_WORKER_AGE_WEIGHTS };
    let age_band = AgeBand::ALL[pick_weighted(weights, rng)];
    let household_size = pick_weighted(&HOUSEHOLD_SIZE_WEIGHTS, rng) as u8 + 1;
    let student_p = match (age_band, worker) {
        (AgeBand::Under18, _) => 0.95,
        (AgeBand::From18To34, false) => 0.3,
        (AgeBand::From18To34, true) => 0.08,
        _ => 0.02,
    };
    let student = rng.random_bool(student_p);
    Demographics { age_band, household_size, worker, student }
}

/// Synthetic agents with homes, demographics and, for workers, a workplace
/// chosen so one-way network commutes follow a log-normal around the
/// configured median.
pub fn generate_population(
    n_agents: usize,
    catalog: &PoiCatalog,
    oracle: &TravelTimeOracle,
    cfg: &PopulationConfig,
    seed: u64,
) -> Result<Vec<AgentRecord>, WorldError> {
    if n_agents == 0 {
        return Err(WorldError::Config("population needs at least one agent".into()));
    }
    let residences = catalog.by_activity(ActivityType::Home);
    let workplaces = catalog.by_activity(ActivityType::Work);
    if residences.is_empty() {
        return Err(WorldError::NoPoisFor(ActivityType::Home));
    }
    if cfg.worker_fraction > 0.0 && workplaces.is_empty() {
        return Err(WorldError::NoPoisFor(ActivityType::Work));
    }
    let capacity = residences.len() * cfg.max_occupancy.max(1);
    if n_agents > capacity {
        return Err(WorldError::Config(format!(
            "{n_agents} agents exceed {} residences x {} occupants",
            residences.len(),
            cfg.max_occupancy
        )));
    }

    // Homes are drawn sequentially so occupancy limits are exact.
    let mut rng = rng::stream(seed, Stage::Population, u64::MAX);
    let mut occupancy = vec![0usize; residences.len()];
    let mut homes = Vec::with_capacity(n_agents);
    let mut open: Vec<usize> = (0..residences.len()).collect();
    for _ in 0..n_agents {
        let slot = rng.random_range(0..open.len());
        let r = open[slot];
        homes.push(residences[r]);
        occupancy[r] += 1;
        if occupancy[r] >= cfg.max_occupancy.max(1) {
            open.swap_remove(slot);
        }
    }

    let work_nodes: Vec<(PoiId, u32)> =
        workplaces.iter().map(|&id| (id, oracle.snap(catalog.location(id)))).collect();
    let commute = LogNormal::new(cfg.commute_median_min.max(1.0).ln(), cfg.commute_sigma.max(1e-6))
        .map_err(|e| WorldError::Config(format!("commute distribution: {e}")))?;
    let pool = cfg.commute_choice_pool.max(1);
    let padding = 2.0 * oracle.padding_s();

    let ids: Vec<AgentId> = (0..n_agents as AgentId).collect();
    let agents = par::map(&ids, |&agent_id| {
        let mut rng = rng::stream(seed, Stage::Population, agent_id as u64);
        let demographics = sample_demographics(cfg.worker_fraction, &mut rng);
        let home_poi = homes[agent_id as usize];
        let work_poi = demographics.worker.then(|| {
            let target_s = commute.sample(&mut rng).clamp(5.0, 120.0) * 60.0;
            let row = oracle.times_from(oracle.snap(catalog.location(home_poi)));
            let mut scored: Vec<(f64, PoiId)> = work_nodes
                .iter()
                .filter(|(_, node)| row[*node as usize].is_finite())
                .map(|&(id, node)| (((row[node as usize] + padding) - target_s).abs(), id))
                .collect();
            let k = pool.min(scored.len());
            if k == 0 {
                return *workplaces.choose(&mut rng).expect("workplaces checked non-empty");
            }
            scored.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scored.truncate(k);
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scored[rng.random_range(0..k)].1
        });
        AgentRecord { agent_id, demographics, home_poi, work_poi }
    });
    Ok(agents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::test_world;

    #[test]
    fn single_agent_gets_a_valid_home() {
        let (catalog, oracle) = test_world();
        let agents = generate_population(1, &catalog, &oracle, &PopulationConfig::default(), 3).unwrap();
        assert_eq!(agents.len(), 1);
        assert!(catalog.is_valid_for(agents[0].home_poi, ActivityType::Home));
    }

    #[test]
    fn zero_worker_fraction_means_no_workplaces() {
        let (catalog, oracle) = test_world();
        let cfg = PopulationConfig { worker_fraction: 0.0, ..Default::default() };
        let agents = generate_population(50, &catalog, &oracle, &cfg, 3).unwrap();
        assert!(agents.iter().all(|a| a.work_poi.is_none() && !a.demographics.worker));
    }

    #[test]
    fn anchors_reference_valid_pois_and_are_deterministic() {
        let (catalog, oracle) = test_world();
        let a = generate_population(100, &catalog, &oracle, &PopulationConfig::default(), 8).unwrap();
        let b = generate_population(100, &catalog, &oracle, &PopulationConfig::default(), 8).unwrap();
        assert_eq!(a, b);
        for agent in &a {
            assert!(catalog.is_valid_for(agent.home_poi, ActivityType::Home));
            if let Some(w) = agent.work_poi {
                assert!(catalog.is_valid_for(w, ActivityType::Work));
            }
        }
    }

    #[test]
    fn occupancy_limit_is_enforced() {
        let (catalog, oracle) = test_world();
        let cap = catalog.by_activity(ActivityType::Home).len() * 4;
        let too_many = generate_population(cap + 1, &catalog, &oracle, &PopulationConfig::default(), 1);
        assert!(matches!(too_many, Err(WorldError::Config(_))));
        let full = generate_population(cap, &catalog, &oracle, &PopulationConfig::default(), 1).unwrap();
        let mut per_home = std::collections::HashMap::new();
        for a in &full {
            *per_home.entry(a.home_poi).or_insert(0) += 1;
        }
        assert!(per_home.values().all(|&n| n == 4));
    }
}

//! In-memory pipeline: world, chains, assignment, realization and injection.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{generate_chains, ActivityError, ActivityModel};
use crate::assign::{assign_all, scheduled_visits, AssignError, AssignedChain, EprParams};
use crate::domain::{
    truncate_to_window, ActivityChain, AgentId, AgentRecord, DomainError, PoiId, SimClock, Staypoint,
};
use crate::inject::{build_anomalous_testset, InjectError, InjectionOutcome, InjectionPlan};
use crate::par;
use crate::rng::{self, Stage};
use crate::routing::{realize_schedule, PoiRouter, RealizeConfig, TravelTimeOracle, DEFAULT_PADDING_S};
use crate::world::{
    generate_grid_graph, generate_poi_catalog, generate_population, PoiCatalog, RoadGraph, WorldConfig, WorldError,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Activity(#[from] ActivityError),
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Inject(#[from] InjectError),
}

/// Settings for a full run; the activity model is passed separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_agents: usize,
    pub seed: u64,
    pub clock: SimClock,
    pub world: WorldConfig,
    pub epr: EprParams,
    pub padding_s: f64,
    pub departure_jitter_s: f64,
    pub plan: InjectionPlan,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::for_agents(1_000, 1)
    }
}

impl SimConfig {
    pub fn for_agents(n_agents: usize, seed: u64) -> Self {
        Self {
            n_agents,
            seed,
            clock: SimClock::default(),
            world: WorldConfig::for_agents(n_agents),
            epr: EprParams::default(),
            padding_s: DEFAULT_PADDING_S,
            departure_jitter_s: RealizeConfig::default().departure_jitter_s,
            plan: InjectionPlan::default(),
        }
    }

    pub fn realize_config(&self) -> RealizeConfig {
        RealizeConfig { departure_jitter_s: self.departure_jitter_s }
    }
}

pub struct World {
    pub graph: Arc<RoadGraph>,
    pub catalog: PoiCatalog,
    pub oracle: TravelTimeOracle,
    pub agents: Vec<AgentRecord>,
}

impl World {
    pub fn router(&self) -> PoiRouter<'_> {
        PoiRouter::new(&self.oracle, &self.catalog)
    }

    pub fn homes(&self) -> HashMap<AgentId, PoiId> {
        self.agents.iter().map(|a| (a.agent_id, a.home_poi)).collect()
    }
}

/// Road graph, POIs and population generated from `cfg`.
pub fn build_world(cfg: &SimConfig) -> Result<World, SimError> {
    let graph = Arc::new(generate_grid_graph(&cfg.world.grid)?);
    let catalog = generate_poi_catalog(&cfg.world.grid.bbox(), &cfg.world.pois, cfg.seed)?;
    catalog.check_coverage()?;
    let oracle = TravelTimeOracle::new(graph.clone()).with_padding(cfg.padding_s);
    let agents = generate_population(cfg.n_agents, &catalog, &oracle, &cfg.world.population, cfg.seed)?;
    Ok(World { graph, catalog, oracle, agents })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Realization {
    pub train: Vec<Staypoint>,
    pub test: Vec<Staypoint>,
    pub fallbacks: usize,
    pub shortened: usize,
}

impl Realization {
    /// Train and test rows of each agent joined back together, in agent order.
    pub fn per_agent(&self) -> Vec<Vec<Staypoint>> {
        let mut by: std::collections::BTreeMap<AgentId, Vec<Staypoint>> = Default::default();
        for s in self.train.iter().chain(&self.test) {
            by.entry(s.agent_id).or_default().push(*s);
        }
        by.into_values().collect()
    }
}

/// Realizes every assigned chain and splits the result into train and test.
pub fn realize_all(
    assigned: &[AssignedChain],
    router: &PoiRouter<'_>,
    clock: &SimClock,
    cfg: &RealizeConfig,
    seed: u64,
) -> Result<Realization, SimError> {
    let parts = par::map(assigned, |chain| {
        let mut rng = rng::stream(seed, Stage::Realization, chain.agent_id as u64);
        let r = realize_schedule(chain.agent_id, &scheduled_visits(chain, clock), router, clock, cfg, &mut rng);
        truncate_to_window(&r.staypoints, clock).map(|(tr, te)| (tr, te, r.fallbacks, r.shortened))
    });
    let mut out = Realization::default();
    for part in parts {
        let (tr, te, fallbacks, shortened) = part?;
        out.train.extend(tr);
        out.test.extend(te);
        out.fallbacks += fallbacks;
        out.shortened += shortened;
    }
    if out.fallbacks > 0 {
        log::warn!("{} trips used the straight-line fallback", out.fallbacks);
    }
    Ok(out)
}

pub struct Dataset {
    pub clock: SimClock,
    pub world: World,
    pub chains: Vec<ActivityChain>,
    pub assigned: Vec<AssignedChain>,
    pub realization: Realization,
    pub injection: InjectionOutcome,
}

/// Runs every stage in memory.
pub fn run(cfg: &SimConfig, model: &ActivityModel) -> Result<Dataset, SimError> {
    model.validate()?;
    let clock = cfg.clock;
    let world = build_world(cfg)?;
    let chains = generate_chains(&world.agents, model, &clock, cfg.seed);
    let assigned = assign_all(&chains, &world.agents, &world.catalog, &cfg.epr, cfg.seed)?;
    let router = world.router();
    let realization = realize_all(&assigned, &router, &clock, &cfg.realize_config(), cfg.seed)?;
    let injection = build_anomalous_testset(
        &realization.train,
        &realization.test,
        &world.homes(),
        &router,
        &clock,
        &cfg.plan,
        cfg.seed,
    )?;
    drop(router);
    Ok(Dataset { clock, world, chains, assigned, realization, injection })
}

//! Pipeline stages that read and write files under one output directory.
//!
//! Each stage loads its inputs from disk, so any stage can be rerun alone.
//! `all` runs the stages in order through the same files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use staysim_core::activity::{reference_histograms, validate_chains, MIN_CHAINS};
use staysim_core::assign::{assign_all, compute_mobility_stats, scheduled_visits};
use staysim_core::detect::Detector;
use staysim_core::evaluate::{evaluate_run, EVAL_TABLE_HEADER};
use staysim_core::inject::build_anomalous_testset;
use staysim_core::rng::{derive_seed, Stage};
use staysim_core::routing::{feasibility_violations, merge_consecutive, TravelTimeOracle};
use staysim_core::sim::{build_world, realize_all, World};
use staysim_core::world::{load_road_graph, PoiCatalog};
use staysim_core::{AgentId, Staypoint};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::io::{table_path, Format};
use crate::readme::readme_text;
use crate::tables;

/// File locations for one run.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
    pub format: Format,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>, format: Format) -> Self {
        Self { root: root.into(), format }
    }

    fn release(&self, stem: &str) -> PathBuf {
        table_path(&self.root, stem, self.format)
    }

    fn stage(&self, stem: &str) -> PathBuf {
        table_path(&self.root.join("stages"), stem, self.format)
    }

    pub fn readme(&self) -> PathBuf {
        self.root.join("readme.txt")
    }
    pub fn demographics(&self) -> PathBuf {
        self.release("demographics")
    }
    pub fn poi(&self) -> PathBuf {
        self.release("poi")
    }
    pub fn train(&self) -> PathBuf {
        self.release("stay_points_train")
    }
    pub fn truth(&self) -> PathBuf {
        self.release("stay_points_test_truth")
    }
    pub fn anomalous(&self) -> PathBuf {
        self.release("stay_points_test_anomalous")
    }
    pub fn agents(&self) -> PathBuf {
        self.stage("agents")
    }
    pub fn road_edges(&self) -> PathBuf {
        self.root.join("stages").join("road_edges.csv")
    }
    pub fn chains(&self) -> PathBuf {
        self.stage("chains")
    }
    pub fn assigned(&self) -> PathBuf {
        self.stage("assigned")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("stages").join("manifest.json")
    }
    pub fn scores(&self, detector: Detector) -> PathBuf {
        self.stage(&format!("scores_{}", detector.name()))
    }
    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(format!("{name}.json"))
    }

    /// The six files of a dataset release.
    pub fn release_files(&self) -> [PathBuf; 6] {
        [self.readme(), self.demographics(), self.poi(), self.train(), self.truth(), self.anomalous()]
    }

    fn world_files(&self) -> Vec<PathBuf> {
        vec![self.poi(), self.demographics(), self.agents(), self.road_edges()]
    }
}

fn require(stage: &str, paths: &[PathBuf]) -> Result<(), CliError> {
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.exists()).cloned().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::MissingInputs { stage: stage.to_string(), missing })
    }
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) => std::fs::create_dir_all(dir).map_err(|source| CliError::File { path: dir.to_path_buf(), source }),
        None => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    create_parent(path)?;
    std::fs::write(path, text).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn prepare(path: PathBuf) -> Result<PathBuf, CliError> {
    create_parent(&path)?;
    Ok(path)
}

/// World reconstructed from the world stage's files.
pub fn load_world(layout: &Layout, cfg: &PipelineConfig) -> Result<World, CliError> {
    require("world", &layout.world_files())?;
    let catalog = PoiCatalog::from_records(tables::read_pois(&layout.poi(), layout.format)?)?;
    let graph = Arc::new(load_road_graph(&layout.road_edges())?);
    let oracle = TravelTimeOracle::new(graph.clone()).with_padding(cfg.padding_s);
    let agents = tables::read_agents(&layout.agents(), &layout.demographics(), layout.format)?;
    Ok(World { graph, catalog, oracle, agents })
}

pub fn stage_world(cfg: &PipelineConfig, layout: &Layout) -> Result<Value, CliError> {
    let sim = cfg.sim_config()?;
    let world = build_world(&sim)?;
    tables::write_pois(&prepare(layout.poi())?, layout.format, world.catalog.records())?;
    tables::write_demographics(&prepare(layout.demographics())?, layout.format, &world.agents)?;
    tables::write_agents(&prepare(layout.agents())?, layout.format, &world.agents)?;
    let edges = prepare(layout.road_edges())?;
    let file = std::fs::File::create(&edges).map_err(|source| CliError::File { path: edges.clone(), source })?;
    world.graph.write_edge_list(std::io::BufWriter::new(file))?;
    write_text(&layout.readme(), &readme_text(layout.format))?;
    Ok(json!({
        "stage": "world",
        "pois": world.catalog.len(),
        "agents": world.agents.len(),
        "road_nodes": world.graph.n_nodes(),
        "road_edges": world.graph.n_edges(),
    }))
}

pub fn stage_activities(cfg: &PipelineConfig, layout: &Layout) -> Result<Value, CliError> {
    require("activities", &[layout.agents(), layout.demographics()])?;
    let model = cfg.activity_model()?;
    let clock = cfg.clock()?;
    let agents = tables::read_agents(&layout.agents(), &layout.demographics(), layout.format)?;
    let chains = staysim_core::activity::generate_chains(&agents, &model, &clock, cfg.seed);
    tables::write_chains(&prepare(layout.chains())?, layout.format, &chains)?;
    let entries: usize = chains.iter().map(|c| c.entries.len()).sum();
    let report = if chains.len() >= MIN_CHAINS {
        let reference = reference_histograms(&model, &agents, &clock, derive_seed(cfg.seed, Stage::Reference, 0));
        Some(validate_chains(&chains, &reference)?)
    } else {
        log::warn!("{} chains is below the {MIN_CHAINS} needed for chain statistics; skipping them", chains.len());
        None
    };
    write_json(&layout.report("chain_stats"), &report)?;
    Ok(json!({ "stage": "activities", "chains": chains.len(), "entries": entries, "chain_stats": report }))
}

pub fn stage_assign(cfg: &PipelineConfig, layout: &Layout) -> Result<Value, CliError> {
    let mut inputs = layout.world_files();
    inputs.push(layout.chains());
    require("assign", &inputs)?;
    let world = load_world(layout, cfg)?;
    let clock = cfg.clock()?;
    let chains = tables::read_chains(&layout.chains(), layout.format)?;
    let assigned = assign_all(&chains, &world.agents, &world.catalog, &cfg.epr, cfg.seed)?;
    tables::write_assigned(&prepare(layout.assigned())?, layout.format, &assigned)?;

    // Scheduled (pre-routing) stays, in the same agent order as `world.agents`.
    let by_agent: BTreeMap<AgentId, Vec<Staypoint>> = assigned
        .iter()
        .map(|c| {
            let stays = merge_consecutive(&scheduled_visits(c, &clock))
                .into_iter()
                .map(|v| Staypoint::new(c.agent_id, v.poi_id, v.start, v.end))
                .collect();
            (c.agent_id, stays)
        })
        .collect();
    let sequences: Vec<Vec<Staypoint>> =
        world.agents.iter().map(|a| by_agent.get(&a.agent_id).cloned().unwrap_or_default()).collect();
    let stats = compute_mobility_stats(&sequences, &world.agents, &world.catalog, &world.oracle);
    write_json(&layout.report("mobility_stats"), &stats)?;
    Ok(json!({ "stage": "assign", "chains": assigned.len(), "mobility_stats": stats }))
}

pub fn stage_realize(cfg: &PipelineConfig, layout: &Layout) -> Result<Value, CliError> {
    let mut inputs = layout.world_files();
    inputs.push(layout.assigned());
    require("realize", &inputs)?;
    let sim = cfg.sim_config()?;
    let world = load_world(layout, cfg)?;
    let assigned = tables::read_assigned(&layout.assigned(), layout.format)?;
    let router = world.router();
    let r = realize_all(&assigned, &router, &sim.clock, &sim.realize_config(), cfg.seed)?;
    tables::write_staypoints(&prepare(layout.train())?, layout.format, &r.train, false)?;
    tables::write_staypoints(&prepare(layout.truth())?, layout.format, &r.test, false)?;
    let violations: usize = r.per_agent().iter().map(|seq| feasibility_violations(seq, &router).len()).sum();
    let report = json!({
        "train_rows": r.train.len(),
        "test_rows": r.test.len(),
        "fallback_trips": r.fallbacks,
        "shortened_stays": r.shortened,
        "feasibility_violations": violations,
    });
    write_json(&layout.report("realization"), &report)?;
    Ok(json!({ "stage": "realize", "realization": report }))
}

pub fn stage_inject(cfg: &PipelineConfig, layout: &Layout) -> Result<Value, CliError> {
    let mut inputs = layout.world_files();
    inputs.extend([layout.train(), layout.truth()]);
    require("inject", &inputs)?;
    let world = load_world(layout, cfg)?;
    let train = tables::read_staypoints(&layout.train(), layout.format, false)?;
    let truth = tables::read_staypoints(&layout.truth(), layout.format, false)?;
    let outcome = build_anomalous_testset(
        &train,
        &truth,
        &world.homes(),
        &world.router(),
        &cfg.clock()?,
        &cfg.plan,
        cfg.seed,
    )?;
    tables::write_staypoints(&prepare(layout.anomalous())?, layout.format, &outcome.anomalous, true)?;
    write_json(&layout.manifest(), &outcome.manifest())?;
    let report = json!({
        "agents": outcome.n_agents,
        "anomalous_agents": outcome.anomalous_agents,
        "labeled_staypoints": outcome.labeled_staypoints,
        "rows": outcome.anomalous.len(),
        "achieved_agent_prevalence": outcome.achieved_agent_prevalence,
        "achieved_staypoint_prevalence": outcome.achieved_staypoint_prevalence,
        "target_agent_prevalence": cfg.plan.target_agent_prevalence,
        "target_staypoint_prevalence": cfg.plan.target_staypoint_prevalence,
        "skipped": outcome.skipped.iter().map(|(a, why)| json!({"agent_id": a, "reason": why})).collect::<Vec<_>>(),
    });
    write_json(&layout.report("injection"), &report)?;
    Ok(json!({ "stage": "inject", "injection": report }))
}

pub fn stage_detect(cfg: &PipelineConfig, layout: &Layout, detector: Option<Detector>) -> Result<Value, CliError> {
    require("detect", &[layout.train(), layout.anomalous()])?;
    let detector = detector.unwrap_or(cfg.detector);
    let train = tables::read_staypoints(&layout.train(), layout.format, false)?;
    let test = tables::read_staypoints(&layout.anomalous(), layout.format, true)?;
    let scores = detector.score(&train, &test);
    let path = prepare(layout.scores(detector))?;
    tables::write_scores(&path, layout.format, &scores)?;
    Ok(json!({ "stage": "detect", "detector": detector.name(), "rows": scores.len(), "path": path }))
}

pub fn stage_evaluate(
    cfg: &PipelineConfig,
    layout: &Layout,
    detector: Option<Detector>,
    scores_path: Option<&Path>,
) -> Result<Value, CliError> {
    let detector = detector.unwrap_or(cfg.detector);
    let scores_path = scores_path.map(Path::to_path_buf).unwrap_or_else(|| layout.scores(detector));
    require("evaluate", &[scores_path.clone(), layout.truth(), layout.anomalous()])?;
    let scores = tables::read_scores(&scores_path, layout.format)?;
    let truth = tables::read_staypoints(&layout.truth(), layout.format, false)?;
    let anomalous = tables::read_staypoints(&layout.anomalous(), layout.format, true)?;
    let (sp, agent) = evaluate_run(detector.name(), &scores, &truth, &anomalous, cfg.agent_threshold)?;
    log::info!("\n{EVAL_TABLE_HEADER}\n{sp}\n{agent}");
    let report = json!({ "staypoint": sp, "agent": agent });
    write_json(&layout.report(&format!("eval_{}", detector.name())), &report)?;
    Ok(json!({ "stage": "evaluate", "detector": detector.name(), "results": report }))
}

/// Every stage in order; returns each stage's summary.
pub fn run_all(cfg: &PipelineConfig, layout: &Layout) -> Result<Vec<Value>, CliError> {
    Ok(vec![
        stage_world(cfg, layout)?,
        stage_activities(cfg, layout)?,
        stage_assign(cfg, layout)?,
        stage_realize(cfg, layout)?,
        stage_inject(cfg, layout)?,
        stage_detect(cfg, layout, None)?,
        stage_evaluate(cfg, layout, None, None)?,
    ])
}

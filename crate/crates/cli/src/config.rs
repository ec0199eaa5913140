//! Pipeline configuration, read from TOML and overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use staysim_core::activity::ActivityModel;
use staysim_core::assign::EprParams;
use staysim_core::detect::Detector;
use staysim_core::evaluate::AgentThreshold;
use staysim_core::inject::InjectionPlan;
use staysim_core::routing::{RealizeConfig, DEFAULT_PADDING_S};
use staysim_core::sim::SimConfig;
use staysim_core::world::WorldConfig;
use staysim_core::{SimClock, Timestamp};

use crate::error::CliError;
use crate::io::Format;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub n_agents: usize,
    pub out_dir: PathBuf,
    pub format: Format,
    /// JSON activity model; the built-in default when absent.
    pub activity_model: Option<PathBuf>,
    /// First instant of the train window; must be local midnight at UTC-08:00.
    pub train_start: String,
    /// World settings; when absent, POI counts are scaled to `n_agents`.
    pub world: Option<WorldConfig>,
    pub epr: EprParams,
    pub padding_s: f64,
    pub departure_jitter_s: f64,
    pub plan: InjectionPlan,
    pub detector: Detector,
    pub agent_threshold: AgentThreshold,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_agents: 1_000,
            out_dir: PathBuf::from("out"),
            format: Format::Columnar,
            activity_model: None,
            train_start: SimClock::default().train_start().to_string(),
            world: None,
            epr: EprParams::default(),
            padding_s: DEFAULT_PADDING_S,
            departure_jitter_s: RealizeConfig::default().departure_jitter_s,
            plan: InjectionPlan::default(),
            detector: Detector::VisitRate,
            agent_threshold: AgentThreshold::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Relative model paths are taken relative to the config file.
        if let (Some(model), Some(dir)) = (&cfg.activity_model, path.parent()) {
            if model.is_relative() {
                cfg.activity_model = Some(dir.join(model));
            }
        }
        Ok(cfg)
    }

    pub fn clock(&self) -> Result<SimClock, CliError> {
        let start: Timestamp = self.train_start.parse().map_err(|e| CliError::Config(format!("train_start: {e}")))?;
        SimClock::starting_at(start).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        Ok(SimConfig {
            n_agents: self.n_agents,
            seed: self.seed,
            clock: self.clock()?,
            world: self.world.clone().unwrap_or_else(|| WorldConfig::for_agents(self.n_agents)),
            epr: self.epr,
            padding_s: self.padding_s,
            departure_jitter_s: self.departure_jitter_s,
            plan: self.plan.clone(),
        })
    }

    pub fn activity_model(&self) -> Result<ActivityModel, CliError> {
        let model = match &self.activity_model {
            None => ActivityModel::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|_| CliError::MissingInputs {
                    stage: "config".into(),
                    missing: vec![path.clone()],
                })?;
                ActivityModel::from_json(&text)?
            }
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks everything that can be checked before any stage runs.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_agents == 0 {
            return Err(CliError::Config("n_agents must be positive".into()));
        }
        self.clock()?;
        self.plan.validate()?;
        if let Some(path) = &self.activity_model {
            if !path.exists() {
                return Err(CliError::MissingInputs { stage: "config".into(), missing: vec![path.clone()] });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.clock().unwrap(), SimClock::default());
        assert_eq!(cfg.sim_config().unwrap(), SimConfig::for_agents(1_000, 1));
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg: PipelineConfig = toml::from_str(
            "seed = 9\nformat = \"csv\"\n[plan]\nmix = 0.25\n[epr]\nbeta = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.format, Format::Csv);
        assert_eq!(cfg.plan.mix, 0.25);
        assert_eq!(cfg.plan.repeat_min, InjectionPlan::default().repeat_min);
        assert_eq!(cfg.epr.beta, 2.0);
        assert_eq!(cfg.epr.rho, 0.6);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_clock() {
        assert!(toml::from_str::<PipelineConfig>("sede = 3").is_err());
        let cfg = PipelineConfig { train_start: "2024-01-01T06:00:00-08:00".into(), ..Default::default() };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn missing_model_file_is_reported() {
        let cfg = PipelineConfig { activity_model: Some("/nonexistent/model.json".into()), ..Default::default() };
        match cfg.validate() {
            Err(CliError::MissingInputs { missing, .. }) => assert_eq!(missing, vec![PathBuf::from("/nonexistent/model.json")]),
            other => panic!("{other:?}"),
        }
    }
}

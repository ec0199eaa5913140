//! The simulated city: POI catalog, road graph and synthetic population.

mod graph;
mod poi;
mod population;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{
    generate_grid_graph, load_road_graph, parse_edge_list, GridConfig, RawEdge, RoadEdge, RoadGraph,
    EDGE_LIST_HEADER,
};
pub use poi::{generate_poi_catalog, PoiCatalog, PoiConfig, REFERENCE_AGENTS, REFERENCE_POI_COUNTS};
pub use population::{generate_population, PopulationConfig};

use crate::domain::{ActivityType, PoiId};

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("world configuration: {0}")]
    Config(String),
    #[error("duplicate poi_id {0}")]
    DuplicatePoi(PoiId),
    #[error("poi {poi_id} has invalid coordinates ({lat}, {lon})")]
    BadCoordinates { poi_id: PoiId, lat: f64, lon: f64 },
    #[error("poi {0} has no activity types")]
    NoActivityTypes(PoiId),
    #[error("no POI is valid for activity type {0}")]
    NoPoisFor(ActivityType),
    #[error("road graph is empty")]
    EmptyGraph,
    #[error("edge list line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for WorldError {
    fn from(e: std::io::Error) -> Self {
        WorldError::Io(e.to_string())
    }
}

impl From<csv::Error> for WorldError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        WorldError::Parse { line, message: e.to_string() }
    }
}

/// Everything needed to build a world from scratch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub grid: GridConfig,
    pub pois: PoiConfig,
    pub population: PopulationConfig,
}

impl WorldConfig {
    /// Default world with POI counts scaled to `n_agents`.
    pub fn for_agents(n_agents: usize) -> Self {
        Self { pois: PoiConfig::scaled_for_agents(n_agents), ..Default::default() }
    }
}

#[cfg(test)]
pub(crate) fn test_world() -> (PoiCatalog, crate::routing::TravelTimeOracle) {
    let grid = GridConfig { rows: 15, cols: 15, ..Default::default() };
    let graph = generate_grid_graph(&grid).unwrap();
    let catalog = generate_poi_catalog(&grid.bbox(), &PoiConfig::scaled_for_agents(100), 5).unwrap();
    (catalog, crate::routing::TravelTimeOracle::new(std::sync::Arc::new(graph)))
}

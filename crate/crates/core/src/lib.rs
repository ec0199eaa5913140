//! Synthetic staypoint mobility simulation with labeled anomaly injection.
//!
//! The crate builds a synthetic city (POIs, road grid, population), generates
//! eight weeks of activity chains per agent, assigns each activity to a POI,
//! routes agents between POIs to obtain realistic arrival and departure times,
//! injects recurring and non-recurring anomalies into the test window, and
//! scores and evaluates detectors on the result.
//!
//! Stages, in pipeline order:
//!
//! - [`domain`]: shared value types, timestamps and sequence invariants.
//! - [`world`]: POI catalog, road graph and population.
//! - [`activity`]: Markov activity-chain generator and its JSD validation.
//! - [`assign`]: exploration / preferential-return POI assignment and mobility statistics.
//! - [`routing`]: travel-time oracle and schedule realization.
//! - [`inject`]: anomaly injection and the anomalous test set.
//! - [`detect`]: visit-rate and novelty detectors, grid discretization.
//! - [`evaluate`]: AP / AUCROC, label derivation, corruptions.
//! - [`sim`]: in-memory orchestration of the stages above.

pub mod activity;
pub mod assign;
pub mod detect;
pub mod domain;
pub mod evaluate;
pub mod geo;
pub mod inject;
mod par;
pub mod rng;
pub mod routing;
pub mod sim;
pub mod world;

pub use domain::{
    ActivityChain, ActivitySet, ActivityType, AgentId, AgentRecord, AnomalyLabel, ChainEntry,
    Demographics, PoiId, PoiRecord, SimClock, Staypoint, Timestamp,
};

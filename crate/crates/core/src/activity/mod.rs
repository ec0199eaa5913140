//! Activity-type chains from a slot-conditioned Markov model, and the
//! histogram suite used to check generated chains against a reference.

mod model;
mod validate;

use thiserror::Error;

pub use model::{
    allowed_activities, generate_chain, generate_chains, ActivityModel, DayClass, LogNormalMinutes, N_SLOTS,
    SLOT_MINUTES, TIME_STEP_MIN,
};
pub use validate::{
    compare_histograms, jsd, reference_histograms, transition_similarity, validate_chains, ChainHistograms,
    ChainStatsReport, DAILY_COUNT_BINS, DURATION_BINS, MIN_CHAINS,
};

#[derive(Debug, Error, PartialEq)]
pub enum ActivityError {
    #[error("invalid activity model: {0}")]
    InvalidModel(String),
    #[error("histogram is empty or has negative mass")]
    EmptyHistogram,
    #[error("histogram lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{found} chains given, at least {needed} needed")]
    TooFewChains { found: usize, needed: usize },
}

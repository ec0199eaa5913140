use serde::{Deserialize, Serialize};

use super::model::{generate_chains, ActivityModel, N_SLOTS, SLOT_MINUTES};
use super::ActivityError;
use crate::domain::{ActivityChain, AgentRecord, SimClock, MINUTES_PER_DAY, N_ACTIVITY_TYPES};

/// Chains needed before histograms are considered stable.
pub const MIN_CHAINS: usize = 100;
/// Daily counts at or above this share the last bin.
pub const DAILY_COUNT_BINS: usize = 16;
pub const DURATION_BINS: usize = 48;

/// Jensen-Shannon divergence in bits between two histograms on the same support.
///
/// Inputs that do not sum to one are renormalized with a warning.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, ActivityError> {
    if p.len() != q.len() {
        return Err(ActivityError::LengthMismatch(p.len(), q.len()));
    }
    let norm = |h: &[f64]| -> Result<Vec<f64>, ActivityError> {
        if h.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(ActivityError::EmptyHistogram);
        }
        let s: f64 = h.iter().sum();
        if h.is_empty() || s <= 0.0 {
            return Err(ActivityError::EmptyHistogram);
        }
        if (s - 1.0).abs() > 1e-9 {
            log::warn!("histogram sums to {s}; renormalizing");
        }
        Ok(h.iter().map(|x| x / s).collect())
    };
    let (p, q) = (norm(p)?, norm(q)?);
    let kl_to_mid = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * (2.0 * x / (x + y)).log2())
            .sum()
    };
    Ok((0.5 * kl_to_mid(&p, &q) + 0.5 * kl_to_mid(&q, &p)).clamp(0.0, 1.0))
}

fn row_tv(a: &[f64], b: &[f64]) -> Option<f64> {
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    match (sa > 0.0, sb > 0.0) {
        (false, false) => None,
        (true, true) => Some(0.5 * a.iter().zip(b).map(|(x, y)| (x / sa - y / sb).abs()).sum::<f64>()),
        _ => Some(1.0),
    }
}

/// One minus the mean row-wise total-variation distance between two
/// transition matrices (counts or probabilities). Rows are weighted by the
/// mass of `observed`; rows empty in both matrices are skipped.
pub fn transition_similarity(observed: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let mut weighted = 0.0;
    let mut weight = 0.0;
    for (a, b) in observed.iter().zip(reference) {
        let w: f64 = a.iter().sum::<f64>().max(if b.iter().sum::<f64>() > 0.0 { 1e-12 } else { 0.0 });
        if let Some(tv) = row_tv(a, b) {
            weighted += w * tv;
            weight += w;
        }
    }
    if weight == 0.0 {
        1.0
    } else {
        1.0 - weighted / weight
    }
}

/// Count histograms over a set of chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainHistograms {
    pub n_chains: usize,
    pub activity_freq: Vec<f64>,
    /// Start times excluding the midnight home anchors.
    pub start_time: Vec<f64>,
    /// End times excluding the midnight home anchors.
    pub end_time: Vec<f64>,
    pub daily_count: Vec<f64>,
    pub duration: Vec<f64>,
    /// Counts of consecutive distinct activities within a day.
    pub transitions: Vec<Vec<f64>>,
}

impl ChainHistograms {
    pub fn empty() -> Self {
        Self {
            n_chains: 0,
            activity_freq: vec![0.0; N_ACTIVITY_TYPES],
            start_time: vec![0.0; N_SLOTS],
            end_time: vec![0.0; N_SLOTS],
            daily_count: vec![0.0; DAILY_COUNT_BINS],
            duration: vec![0.0; DURATION_BINS],
            transitions: vec![vec![0.0; N_ACTIVITY_TYPES]; N_ACTIVITY_TYPES],
        }
    }

    pub fn add_chain(&mut self, chain: &ActivityChain) {
        self.n_chains += 1;
        for (_, entries) in chain.days() {
            self.daily_count[entries.len().min(DAILY_COUNT_BINS - 1)] += 1.0;
            for (i, e) in entries.iter().enumerate() {
                self.activity_freq[e.activity.index()] += 1.0;
                if e.start_min > 0 {
                    self.start_time[(e.start_min / SLOT_MINUTES) as usize] += 1.0;
                }
                if e.end_min < MINUTES_PER_DAY {
                    self.end_time[(e.end_min / SLOT_MINUTES) as usize] += 1.0;
                }
                let d = (e.end_min.saturating_sub(e.start_min) / SLOT_MINUTES) as usize;
                self.duration[d.min(DURATION_BINS - 1)] += 1.0;
                if i > 0 && entries[i - 1].activity != e.activity {
                    self.transitions[entries[i - 1].activity.index()][e.activity.index()] += 1.0;
                }
            }
        }
    }

    /// Adds another histogram set; counts are additive so merge order only
    /// affects floating-point rounding.
    pub fn merge(mut self, other: &ChainHistograms) -> Self {
        self.n_chains += other.n_chains;
        let add = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.activity_freq, &other.activity_freq);
        add(&mut self.start_time, &other.start_time);
        add(&mut self.end_time, &other.end_time);
        add(&mut self.daily_count, &other.daily_count);
        add(&mut self.duration, &other.duration);
        for (a, b) in self.transitions.iter_mut().zip(&other.transitions) {
            add(a, b);
        }
        self
    }

    pub fn from_chains(chains: &[ActivityChain]) -> Self {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            chains
                .par_chunks(256)
                .map(|chunk| {
                    let mut h = Self::empty();
                    chunk.iter().for_each(|c| h.add_chain(c));
                    h
                })
                .reduce(Self::empty, |a, b| a.merge(&b))
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut h = Self::empty();
            chains.iter().for_each(|c| h.add_chain(c));
            h
        }
    }
}

/// Divergences of generated chains from reference distributions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStatsReport {
    pub jsd_activity_freq: f64,
    pub jsd_start_time: f64,
    pub jsd_end_time: f64,
    pub jsd_daily_count: f64,
    pub jsd_duration: f64,
    pub transition_similarity: f64,
}

impl ChainStatsReport {
    pub fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("jsd_activity_freq", self.jsd_activity_freq),
            ("jsd_start_time", self.jsd_start_time),
            ("jsd_end_time", self.jsd_end_time),
            ("jsd_daily_count", self.jsd_daily_count),
            ("jsd_duration", self.jsd_duration),
            ("transition_similarity", self.transition_similarity),
        ]
    }

    pub fn max_jsd(&self) -> f64 {
        self.entries()[..5].iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }
}

/// Reference histograms drawn from `model` for the given agents.
pub fn reference_histograms(
    model: &ActivityModel,
    agents: &[AgentRecord],
    clock: &SimClock,
    seed: u64,
) -> ChainHistograms {
    ChainHistograms::from_chains(&generate_chains(agents, model, clock, seed))
}

pub fn validate_chains(chains: &[ActivityChain], reference: &ChainHistograms) -> Result<ChainStatsReport, ActivityError> {
    if chains.len() < MIN_CHAINS {
        return Err(ActivityError::TooFewChains { found: chains.len(), needed: MIN_CHAINS });
    }
    compare_histograms(&ChainHistograms::from_chains(chains), reference)
}

pub fn compare_histograms(
    observed: &ChainHistograms,
    reference: &ChainHistograms,
) -> Result<ChainStatsReport, ActivityError> {
    Ok(ChainStatsReport {
        jsd_activity_freq: jsd(&observed.activity_freq, &reference.activity_freq)?,
        jsd_start_time: jsd(&observed.start_time, &reference.start_time)?,
        jsd_end_time: jsd(&observed.end_time, &reference.end_time)?,
        jsd_daily_count: jsd(&observed.daily_count, &reference.daily_count)?,
        jsd_duration: jsd(&observed.duration, &reference.duration)?,
        transition_similarity: transition_similarity(&observed.transitions, &reference.transitions),
    })
}

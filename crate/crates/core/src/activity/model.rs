use chrono::Weekday;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ActivityError;
use crate::domain::{
    ActivityChain, ActivityType, AgentRecord, ChainEntry, SimClock, MINUTES_PER_DAY, N_ACTIVITY_TYPES,
};
use crate::par;
use crate::rng::{self, Stage};

pub const SLOT_MINUTES: u16 = 30;
pub const N_SLOTS: usize = 48;
/// Scheduled times are multiples of this many minutes.
pub const TIME_STEP_MIN: u16 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayClass {
    Weekday,
    Weekend,
}

impl DayClass {
    pub const ALL: [DayClass; 2] = [DayClass::Weekday, DayClass::Weekend];

    pub fn of(day: Weekday) -> Self {
        match day {
            Weekday::Sat | Weekday::Sun => DayClass::Weekend,
            _ => DayClass::Weekday,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Log-normal in minutes, parameterised by its median.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormalMinutes {
    pub median_min: f64,
    pub sigma: f64,
}

impl LogNormalMinutes {
    pub const fn new(median_min: f64, sigma: f64) -> Self {
        Self { median_min, sigma }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return self.median_min;
        }
        let z: f64 = Normal::new(0.0, self.sigma).expect("validated sigma").sample(rng);
        self.median_min * z.exp()
    }
}

type Matrix = Vec<Vec<f64>>;

/// Time-inhomogeneous Markov model over activity types.
///
/// `transitions[class][slot][from][to]` is the probability that the activity
/// following `from`, chosen when `from` ends in half-hour `slot`, is `to`.
/// Choosing `to == from` extends the current activity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityModel {
    pub transitions: Vec<Vec<Matrix>>,
    /// Indexed by activity type.
    pub durations: Vec<LogNormalMinutes>,
    /// Time the agent first leaves home, per day class, in minutes after midnight.
    pub first_departure: Vec<LogNormalMinutes>,
    /// Inclusive range of the gap left for travel between activities, minutes.
    pub travel_gap_min: [u16; 2],
    /// An away activity is only scheduled if the agent can still be home this
    /// many minutes before midnight.
    pub home_return_buffer_min: u16,
    /// Chance that a day repeats the agent's template day for that weekday
    /// instead of being drawn afresh.
    #[serde(default)]
    pub routine_keep_prob: f64,
}

fn round_step(minutes: f64) -> u16 {
    let step = TIME_STEP_MIN as f64;
    let r = (minutes / step).round() * step;
    r.clamp(step, MINUTES_PER_DAY as f64) as u16
}

/// Damps every non-anchor activity relative to Home, Work and School.
const FLEX_SCALE: f64 = 0.4;

fn hand_weight(class: DayClass, h: f64, from: ActivityType, to: ActivityType) -> f64 {
    use ActivityType::*;
    let within = |a: f64, b: f64| h >= a && h < b;
    let weekday = class == DayClass::Weekday;
    if from == to {
        return match to {
            Home if within(9.0, 16.0) => 0.5,
            Home if h >= 19.0 => 0.6,
            Home => 0.15,
            Work if weekday && within(10.0, 15.0) => 2.4,
            School if weekday && within(10.0, 13.0) => 2.0,
            _ => 0.0,
        };
    }
    let base = match to {
        Home => {
            if h < 10.0 {
                0.15
            } else if h < 15.0 {
                0.55
            } else if h < 18.0 {
                1.6
            } else {
                4.0
            }
        }
        Work => match (weekday, within(5.5, 10.0), within(10.0, 15.0)) {
            (true, true, _) => 6.0,
            (true, _, true) => 0.3,
            (false, _, _) if within(7.0, 12.0) => 0.35,
            _ => 0.03,
        },
        School => match (weekday, within(6.5, 9.0)) {
            (true, true) => 6.0,
            (true, false) if within(9.0, 14.0) => 0.2,
            _ => 0.005,
        },
        ChildCare => match weekday {
            true if within(6.5, 9.0) => 0.2,
            true if within(15.0, 18.0) => 0.08,
            _ => 0.01,
        },
        Transportation => 0.05,
        BuyGoods if within(9.0, 21.0) => {
            if weekday {
                0.3
            } else {
                0.7
            }
        }
        BuyGoods => 0.04,
        Services if within(9.0, 18.0) => 0.15,
        Services => 0.02,
        EatOut => {
            let w = if within(11.0, 14.0) {
                0.8
            } else if within(17.5, 21.0) {
                0.4
            } else {
                0.08
            };
            if weekday {
                w
            } else {
                w * 1.3
            }
        }
        Errands if within(9.0, 18.0) => 0.2,
        Errands => 0.03,
        Recreation => match weekday {
            true if within(17.0, 22.0) => 0.2,
            true => 0.05,
            false if within(10.0, 21.0) => 0.55,
            false => 0.05,
        },
        Exercise if within(6.0, 8.5) || within(17.0, 20.5) => 0.2,
        Exercise => 0.04,
        Visit => match weekday {
            true if within(17.0, 22.0) => 0.12,
            true => 0.03,
            false if within(11.0, 21.0) => 0.35,
            false => 0.03,
        },
        HealthCare if weekday && within(8.0, 17.0) => 0.08,
        HealthCare => 0.01,
        Religious if !weekday && within(8.0, 13.0) => 0.25,
        Religious => 0.01,
        SomethingElse => 0.06,
        DropOff => match weekday {
            true if within(7.0, 9.0) => 0.2,
            true if within(14.5, 17.5) => 0.12,
            _ => 0.02,
        },
    };
    let base = match to {
        Home | Work | School => base,
        _ => base * FLEX_SCALE,
    };
    let boost = match (from, to) {
        // Back to work or school after a midday errand.
        (EatOut | BuyGoods | Errands | Services, Work) if weekday && within(11.0, 14.5) => 12.0,
        (DropOff | ChildCare, Work) if weekday && within(6.5, 10.0) => 2.0,
        (Work | School, Home) if h >= 15.0 => 1.5,
        _ => 1.0,
    };
    base * boost
}

fn normalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter_mut().for_each(|x| *x /= s);
    }
}

impl Default for ActivityModel {
    /// Hand-authored commuter weekdays and leisure-heavy weekends.
    fn default() -> Self {
        use ActivityType::*;
        let transitions = DayClass::ALL
            .iter()
            .map(|&class| {
                (0..N_SLOTS)
                    .map(|slot| {
                        let h = (slot as f64 + 0.5) * SLOT_MINUTES as f64 / 60.0;
                        ActivityType::ALL
                            .iter()
                            .map(|&from| {
                                let mut row: Vec<f64> =
                                    ActivityType::ALL.iter().map(|&to| hand_weight(class, h, from, to)).collect();
                                normalize(&mut row);
                                row
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut durations = vec![LogNormalMinutes::new(60.0, 0.5); N_ACTIVITY_TYPES];
        for (t, median, sigma) in [
            (Transportation, 15.0, 0.5),
            (Home, 120.0, 0.7),
            (Work, 240.0, 0.35),
            (School, 330.0, 0.2),
            (ChildCare, 45.0, 0.5),
            (BuyGoods, 30.0, 0.6),
            (Services, 40.0, 0.6),
            (EatOut, 50.0, 0.4),
            (Errands, 20.0, 0.5),
            (Recreation, 110.0, 0.6),
            (Exercise, 60.0, 0.4),
            (Visit, 120.0, 0.6),
            (HealthCare, 60.0, 0.5),
            (Religious, 90.0, 0.4),
            (SomethingElse, 60.0, 0.7),
            (DropOff, 10.0, 0.4),
        ] {
            durations[t.index()] = LogNormalMinutes::new(median, sigma);
        }
        Self {
            transitions,
            durations,
            first_departure: vec![LogNormalMinutes::new(465.0, 0.12), LogNormalMinutes::new(600.0, 0.2)],
            travel_gap_min: [15, 30],
            home_return_buffer_min: 30,
            routine_keep_prob: 0.85,
        }
    }
}

impl ActivityModel {
    /// Every row in every slot sends the agent home: a single Home block per day.
    pub fn home_only() -> Self {
        let mut m = Self::default();
        for row in m.transitions.iter_mut().flatten().flatten() {
            row.iter_mut().for_each(|x| *x = 0.0);
            row[ActivityType::Home.index()] = 1.0;
        }
        m.durations[ActivityType::Home.index()] = LogNormalMinutes::new(MINUTES_PER_DAY as f64, 0.0);
        m
    }

    /// Uniform transitions over all types in every slot.
    pub fn uniform() -> Self {
        let mut m = Self::default();
        for row in m.transitions.iter_mut().flatten().flatten() {
            row.iter_mut().for_each(|x| *x = 1.0 / N_ACTIVITY_TYPES as f64);
        }
        m
    }

    pub fn row(&self, class: DayClass, slot: usize, from: ActivityType) -> &[f64] {
        &self.transitions[class.index()][slot.min(N_SLOTS - 1)][from.index()]
    }

    /// Structural and stochastic checks; rows must sum to 1 within 1e-9.
    pub fn validate(&self) -> Result<(), ActivityError> {
        let bad = |m: String| Err(ActivityError::InvalidModel(m));
        if self.transitions.len() != DayClass::ALL.len() {
            return bad(format!("expected 2 day classes, found {}", self.transitions.len()));
        }
        for (c, slots) in self.transitions.iter().enumerate() {
            if slots.len() != N_SLOTS {
                return bad(format!("day class {c}: expected {N_SLOTS} slots, found {}", slots.len()));
            }
            for (s, matrix) in slots.iter().enumerate() {
                if matrix.len() != N_ACTIVITY_TYPES || matrix.iter().any(|r| r.len() != N_ACTIVITY_TYPES) {
                    return bad(format!("day class {c} slot {s}: matrix is not 16x16"));
                }
                for (f, row) in matrix.iter().enumerate() {
                    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                        return bad(format!("day class {c} slot {s} row {f}: negative or non-finite entry"));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        return bad(format!("day class {c} slot {s} row {f}: sums to {sum}"));
                    }
                }
            }
        }
        if self.durations.len() != N_ACTIVITY_TYPES {
            return bad(format!("expected 16 duration entries, found {}", self.durations.len()));
        }
        if self.first_departure.len() != DayClass::ALL.len() {
            return bad("first_departure needs one entry per day class".into());
        }
        for d in self.durations.iter().chain(&self.first_departure) {
            if !(d.median_min.is_finite() && d.median_min > 0.0 && d.sigma.is_finite() && d.sigma >= 0.0) {
                return bad(format!("bad log-normal parameters {d:?}"));
            }
        }
        let [lo, hi] = self.travel_gap_min;
        if lo == 0 || lo > hi || hi > 240 {
            return bad(format!("travel gap range [{lo}, {hi}] must be within 1..=240"));
        }
        if !(0.0..=1.0).contains(&self.routine_keep_prob) {
            return bad(format!("routine_keep_prob {} is not a probability", self.routine_keep_prob));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ActivityError> {
        let m: Self = serde_json::from_str(text).map_err(|e| ActivityError::InvalidModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    fn sample_duration<R: Rng>(&self, t: ActivityType, rng: &mut R) -> u16 {
        round_step(self.durations[t.index()].sample(rng))
    }

    fn sample_gap<R: Rng>(&self, rng: &mut R) -> u16 {
        let [lo, hi] = self.travel_gap_min;
        let steps = (lo.div_ceil(TIME_STEP_MIN)..=hi / TIME_STEP_MIN.max(1)).collect::<Vec<_>>();
        match steps.is_empty() {
            true => lo,
            false => steps[rng.random_range(0..steps.len())] * TIME_STEP_MIN,
        }
    }

    fn sample_next<R: Rng>(
        &self,
        class: DayClass,
        minute: u16,
        from: ActivityType,
        allowed: &[bool; N_ACTIVITY_TYPES],
        rng: &mut R,
    ) -> ActivityType {
        let row = self.row(class, (minute / SLOT_MINUTES) as usize, from);
        let total: f64 = row.iter().zip(allowed).filter(|(_, ok)| **ok).map(|(p, _)| p).sum();
        if total <= 0.0 {
            return ActivityType::Home;
        }
        let mut u = rng.random::<f64>() * total;
        for (i, (p, ok)) in row.iter().zip(allowed).enumerate() {
            if !ok || *p <= 0.0 {
                continue;
            }
            u -= p;
            if u < 0.0 {
                return ActivityType::ALL[i];
            }
        }
        ActivityType::ALL[row.iter().zip(allowed).rposition(|(p, ok)| *ok && *p > 0.0).unwrap_or(1)]
    }

    /// One day's schedule, anchored at Home from midnight to midnight.
    fn generate_day<R: Rng>(
        &self,
        day: u16,
        class: DayClass,
        allowed: &[bool; N_ACTIVITY_TYPES],
        rng: &mut R,
    ) -> Vec<ChainEntry> {
        use ActivityType::Home;
        const END: u16 = MINUTES_PER_DAY;
        let entry = |activity, start_min, end_min| ChainEntry { day, activity, start_min, end_min };
        let latest_away_end = END.saturating_sub(self.travel_gap_min[1] + self.home_return_buffer_min);

        let departure = round_step(self.first_departure[class.index()].sample(rng)).min(latest_away_end);
        let mut out = vec![entry(Home, 0, departure)];
        loop {
            let last = *out.last().expect("day has an entry");
            if last.end_min >= latest_away_end {
                break;
            }
            let next = self.sample_next(class, last.end_min, last.activity, allowed, rng);
            if next == last.activity {
                let end = last.end_min + self.sample_duration(next, rng);
                if next != Home && end > latest_away_end {
                    break;
                }
                out.last_mut().expect("non-empty").end_min = end.min(END);
                continue;
            }
            let start = last.end_min + self.sample_gap(rng);
            let end = start + self.sample_duration(next, rng);
            if next == Home {
                if end >= latest_away_end {
                    break;
                }
                out.push(entry(Home, start, end));
            } else {
                if end > latest_away_end {
                    break;
                }
                out.push(entry(next, start, end));
            }
        }
        let last = out.last_mut().expect("day has an entry");
        if last.activity == Home {
            last.end_min = END;
        } else {
            let start = last.end_min + self.sample_gap(rng);
            out.push(entry(Home, start.min(END - TIME_STEP_MIN), END));
        }
        out
    }
}

/// Activity types the agent may take part in.
pub fn allowed_activities(agent: &AgentRecord) -> [bool; N_ACTIVITY_TYPES] {
    let mut allowed = [true; N_ACTIVITY_TYPES];
    allowed[ActivityType::Work.index()] = agent.demographics.worker && agent.work_poi.is_some();
    allowed[ActivityType::School.index()] = agent.demographics.student;
    allowed
}

/// Full-horizon chain for one agent from its own random stream.
pub fn generate_chain(agent: &AgentRecord, model: &ActivityModel, clock: &SimClock, seed: u64) -> ActivityChain {
    let mut rng = rng::stream(seed, Stage::Activities, agent.agent_id as u64);
    let allowed = allowed_activities(agent);
    let mut templates: [Option<Vec<ChainEntry>>; 7] = Default::default();
    let mut entries = Vec::with_capacity(clock.n_days() as usize * 6);
    for day in 1..=clock.n_days() {
        let weekday = clock.weekday(day);
        let class = DayClass::of(weekday);
        let slot = &mut templates[weekday.num_days_from_monday() as usize];
        let keep = model.routine_keep_prob > 0.0 && rng.random_bool(model.routine_keep_prob.min(1.0));
        match slot {
            Some(t) if keep => entries.extend(t.iter().map(|e| ChainEntry { day, ..*e })),
            _ => {
                let fresh = model.generate_day(day, class, &allowed, &mut rng);
                if slot.is_none() {
                    *slot = Some(fresh.clone());
                }
                entries.extend(fresh);
            }
        }
    }
    ActivityChain { agent_id: agent.agent_id, entries }
}

pub fn generate_chains(
    agents: &[AgentRecord],
    model: &ActivityModel,
    clock: &SimClock,
    seed: u64,
) -> Vec<ActivityChain> {
    par::map(agents, |a| generate_chain(a, model, clock, seed))
}

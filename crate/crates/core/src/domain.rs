//! Core value types shared by every stage.
//!
//! Timestamps are epoch seconds displayed at a fixed UTC-08:00 offset; no
//! daylight-saving rules apply anywhere in the pipeline.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, TimeZone, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type AgentId = u32;
pub type PoiId = u32;

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const MINUTES_PER_DAY: u16 = 1_440;
/// Fixed display offset of every timestamp, in seconds east of UTC.
pub const UTC_OFFSET_SECONDS: i32 = -8 * 3600;
pub const WINDOW_DAYS: u16 = 28;
/// Shortest stay the generator, router and injector will produce.
pub const MIN_STAY_SECONDS: i64 = 5 * 60;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("unknown activity type `{0}`")]
    UnknownActivity(String),
    #[error("invalid timestamp `{0}`")]
    BadTimestamp(String),
    #[error("staypoint {index} ({start} to {end}) lies entirely outside the simulation window")]
    OutOfWindow { index: usize, start: Timestamp, end: Timestamp },
    #[error("invalid anomaly type {0}; expected 0, 1 or 2")]
    BadAnomalyType(u8),
    #[error("anomaly flag {flag} disagrees with anomaly type {kind}")]
    InconsistentLabel { flag: bool, kind: u8 },
    #[error("invalid clock: {0}")]
    BadClock(String),
}

macro_rules! activity_types {
    ($($variant:ident),+ $(,)?) => {
        /// The sixteen modeled activity types.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum ActivityType { $($variant),+ }

        impl ActivityType {
            pub const ALL: [ActivityType; 16] = [$(ActivityType::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $(ActivityType::$variant => stringify!($variant)),+ }
            }
        }

        impl FromStr for ActivityType {
            type Err = DomainError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $(stringify!($variant) => Ok(ActivityType::$variant),)+
                    other => Err(DomainError::UnknownActivity(other.to_string())),
                }
            }
        }
    };
}

activity_types!(
    Transportation,
    Home,
    Work,
    School,
    ChildCare,
    BuyGoods,
    Services,
    EatOut,
    Errands,
    Recreation,
    Exercise,
    Visit,
    HealthCare,
    Religious,
    SomethingElse,
    DropOff,
);

pub const N_ACTIVITY_TYPES: usize = 16;

impl ActivityType {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for ActivityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Set of activity types, as a 16-bit mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ActivitySet(u16);

impl ActivitySet {
    pub const EMPTY: ActivitySet = ActivitySet(0);

    pub fn of(types: &[ActivityType]) -> Self {
        types.iter().fold(Self::EMPTY, |s, t| s.with(*t))
    }

    pub fn with(self, t: ActivityType) -> Self {
        ActivitySet(self.0 | (1 << t.index()))
    }

    pub fn insert(&mut self, t: ActivityType) {
        *self = self.with(t);
    }

    pub fn contains(self, t: ActivityType) -> bool {
        self.0 & (1 << t.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = ActivityType> {
        ActivityType::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    /// `Home|Visit|DropOff` style list in canonical order.
    pub fn to_delimited(self) -> String {
        self.iter().map(ActivityType::name).collect::<Vec<_>>().join("|")
    }

    pub fn parse_delimited(s: &str) -> Result<Self, DomainError> {
        s.split('|')
            .filter(|part| !part.trim().is_empty())
            .try_fold(Self::EMPTY, |set, part| Ok(set.with(part.trim().parse()?)))
    }
}

impl FromIterator<ActivityType> for ActivitySet {
    fn from_iter<I: IntoIterator<Item = ActivityType>>(iter: I) -> Self {
        iter.into_iter().fold(Self::EMPTY, |s, t| s.with(t))
    }
}

fn display_offset() -> FixedOffset {
    FixedOffset::east_opt(UTC_OFFSET_SECONDS).expect("valid offset")
}

/// Instant in epoch seconds; always rendered as ISO-8601 at UTC-08:00.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    /// Builds a timestamp from wall-clock fields at the fixed display offset.
    pub fn local(year: i32, month: u32, day: u32, hour: u32, minute: u32, second: u32) -> Self {
        let dt = display_offset()
            .with_ymd_and_hms(year, month, day, hour, minute, second)
            .single()
            .expect("valid local date-time");
        Timestamp(dt.timestamp())
    }

    pub fn seconds(self) -> i64 {
        self.0
    }

    pub fn plus(self, seconds: i64) -> Self {
        Timestamp(self.0 + seconds)
    }

    fn to_local(self) -> DateTime<FixedOffset> {
        DateTime::from_timestamp(self.0, 0)
            .expect("timestamp in chrono range")
            .with_timezone(&display_offset())
    }

    pub fn local_date(self) -> NaiveDate {
        self.to_local().date_naive()
    }

    pub fn weekday(self) -> Weekday {
        self.to_local().weekday()
    }

    /// Seconds since local midnight.
    pub fn seconds_of_day(self) -> i64 {
        (self.0 + UTC_OFFSET_SECONDS as i64).rem_euclid(SECONDS_PER_DAY)
    }

    /// Local midnight at or before this instant.
    pub fn local_midnight(self) -> Timestamp {
        Timestamp(self.0 - self.seconds_of_day())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_local().format("%Y-%m-%dT%H:%M:%S%:z"))
    }
}

impl FromStr for Timestamp {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DateTime::parse_from_rfc3339(s.trim())
            .map(|dt| Timestamp(dt.timestamp()))
            .map_err(|_| DomainError::BadTimestamp(s.to_string()))
    }
}

/// Consecutive four-week train and test windows.
///
/// `test_end` is exclusive; the last covered instant is one second earlier
/// (23:59:59 local on the final day).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    train_start: Timestamp,
    train_end: Timestamp,
    test_start: Timestamp,
    test_end: Timestamp,
}

impl Default for SimClock {
    fn default() -> Self {
        Self::starting_at(Timestamp::local(2024, 1, 1, 0, 0, 0)).expect("default clock is valid")
    }
}

impl SimClock {
    pub const WINDOW_SECONDS: i64 = WINDOW_DAYS as i64 * SECONDS_PER_DAY;

    /// Clock whose train window begins at `train_start`, which must be local midnight.
    pub fn starting_at(train_start: Timestamp) -> Result<Self, DomainError> {
        if train_start.seconds_of_day() != 0 {
            return Err(DomainError::BadClock(format!("train start {train_start} is not local midnight")));
        }
        let train_end = train_start.plus(Self::WINDOW_SECONDS);
        Ok(Self {
            train_start,
            train_end,
            test_start: train_end,
            test_end: train_end.plus(Self::WINDOW_SECONDS),
        })
    }

    pub fn train_start(&self) -> Timestamp {
        self.train_start
    }
    pub fn train_end(&self) -> Timestamp {
        self.train_end
    }
    pub fn test_start(&self) -> Timestamp {
        self.test_start
    }
    pub fn test_end(&self) -> Timestamp {
        self.test_end
    }

    /// Last instant inside the window (23:59:59 on day 56).
    pub fn window_last(&self) -> Timestamp {
        self.test_end.plus(-1)
    }

    pub fn n_days(&self) -> u16 {
        2 * WINDOW_DAYS
    }

    pub fn train_len(&self) -> i64 {
        self.train_end.0 - self.train_start.0
    }

    pub fn test_len(&self) -> i64 {
        self.test_end.0 - self.test_start.0
    }

    /// Local midnight that opens simulated day `day` (1-based).
    pub fn day_start(&self, day: u16) -> Timestamp {
        self.train_start.plus((day as i64 - 1) * SECONDS_PER_DAY)
    }

    pub fn weekday(&self, day: u16) -> Weekday {
        self.day_start(day).weekday()
    }

    /// 1-based simulated day containing `t`, if inside the window.
    pub fn day_of(&self, t: Timestamp) -> Option<u16> {
        if t < self.train_start || t >= self.test_end {
            return None;
        }
        Some(((t.0 - self.train_start.0) / SECONDS_PER_DAY) as u16 + 1)
    }
}

/// Place an agent can stay at.
#[derive(Clone, Debug, PartialEq)]
pub struct PoiRecord {
    pub poi_id: PoiId,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub act_types: ActivitySet,
}

impl PoiRecord {
    pub fn location(&self) -> crate::geo::LatLon {
        crate::geo::LatLon::new(self.latitude, self.longitude)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    #[serde(rename = "0-17")]
    Under18,
    #[serde(rename = "18-34")]
    From18To34,
    #[serde(rename = "35-54")]
    From35To54,
    #[serde(rename = "55-64")]
    From55To64,
    #[serde(rename = "65+")]
    Over65,
}

impl AgeBand {
    pub const ALL: [AgeBand; 5] =
        [AgeBand::Under18, AgeBand::From18To34, AgeBand::From35To54, AgeBand::From55To64, AgeBand::Over65];

    pub fn label(self) -> &'static str {
        match self {
            AgeBand::Under18 => "0-17",
            AgeBand::From18To34 => "18-34",
            AgeBand::From35To54 => "35-54",
            AgeBand::From55To64 => "55-64",
            AgeBand::Over65 => "65+",
        }
    }
}

impl FromStr for AgeBand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgeBand::ALL
            .into_iter()
            .find(|b| b.label() == s)
            .ok_or_else(|| format!("unknown age band `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub age_band: AgeBand,
    pub household_size: u8,
    pub worker: bool,
    pub student: bool,
}

impl Demographics {
    pub const COLUMNS: [&'static str; 4] = ["age_band", "household_size", "worker", "student"];

    /// Attribute columns as `(name, value)` pairs, in [`Self::COLUMNS`] order.
    pub fn attributes(&self) -> [(&'static str, String); 4] {
        [
            ("age_band", self.age_band.label().to_string()),
            ("household_size", self.household_size.to_string()),
            ("worker", self.worker.to_string()),
            ("student", self.student.to_string()),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentRecord {
    pub agent_id: AgentId,
    pub demographics: Demographics,
    pub home_poi: PoiId,
    pub work_poi: Option<PoiId>,
}

/// Ground-truth label of a staypoint in the anomalous test file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnomalyLabel {
    #[default]
    Normal = 0,
    /// A truth staypoint whose times were altered to make room for an injection.
    Modified = 1,
    /// A staypoint added by the injector.
    Injected = 2,
}

impl AnomalyLabel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, DomainError> {
        match code {
            0 => Ok(AnomalyLabel::Normal),
            1 => Ok(AnomalyLabel::Modified),
            2 => Ok(AnomalyLabel::Injected),
            other => Err(DomainError::BadAnomalyType(other)),
        }
    }

    /// Reconstructs a label from the `anomaly` / `anomaly_type` column pair.
    pub fn from_columns(flag: bool, code: u8) -> Result<Self, DomainError> {
        let label = Self::from_code(code)?;
        if label.is_anomalous() != flag {
            return Err(DomainError::InconsistentLabel { flag, kind: code });
        }
        Ok(label)
    }

    pub fn is_anomalous(self) -> bool {
        self != AnomalyLabel::Normal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Staypoint {
    pub agent_id: AgentId,
    pub poi_id: PoiId,
    pub start: Timestamp,
    pub end: Timestamp,
    pub label: AnomalyLabel,
}

impl Staypoint {
    pub fn new(agent_id: AgentId, poi_id: PoiId, start: Timestamp, end: Timestamp) -> Self {
        Self { agent_id, poi_id, start, end, label: AnomalyLabel::Normal }
    }

    pub fn with_label(mut self, label: AnomalyLabel) -> Self {
        self.label = label;
        self
    }

    pub fn anomaly(&self) -> bool {
        self.label.is_anomalous()
    }

    pub fn duration_seconds(&self) -> i64 {
        self.end.0 - self.start.0
    }

    /// Same place and times, ignoring the label.
    pub fn same_visit(&self, other: &Staypoint) -> bool {
        self.agent_id == other.agent_id
            && self.poi_id == other.poi_id
            && self.start == other.start
            && self.end == other.end
    }
}

/// One scheduled activity; minutes are measured from local midnight of `day`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub day: u16,
    pub activity: ActivityType,
    pub start_min: u16,
    pub end_min: u16,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivityChain {
    pub agent_id: AgentId,
    pub entries: Vec<ChainEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChainViolation {
    DayOutOfRange { index: usize },
    Unordered { index: usize },
    BadInterval { index: usize },
    MissingHomeAnchor { day: u16 },
}

impl ActivityChain {
    pub fn days(&self) -> impl Iterator<Item = (u16, &[ChainEntry])> {
        self.entries.chunk_by(|a, b| a.day == b.day).map(|chunk| (chunk[0].day, chunk))
    }

    /// Ordering, interval and home-anchor checks for a chain covering `n_days`.
    pub fn violations(&self, n_days: u16) -> Vec<ChainViolation> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.day == 0 || e.day > n_days {
                out.push(ChainViolation::DayOutOfRange { index: i });
            }
            if e.start_min >= e.end_min || e.end_min > MINUTES_PER_DAY {
                out.push(ChainViolation::BadInterval { index: i });
            }
            if i > 0 {
                let p = &self.entries[i - 1];
                if (p.day, p.end_min) > (e.day, e.start_min) {
                    out.push(ChainViolation::Unordered { index: i });
                }
            }
        }
        let mut seen = 0;
        for (day, entries) in self.days() {
            seen += 1;
            let first = entries.first().expect("non-empty chunk");
            let last = entries.last().expect("non-empty chunk");
            let anchored = first.activity == ActivityType::Home
                && first.start_min == 0
                && last.activity == ActivityType::Home
                && last.end_min == MINUTES_PER_DAY;
            if !anchored {
                out.push(ChainViolation::MissingHomeAnchor { day });
            }
        }
        if seen != n_days as usize {
            for day in 1..=n_days {
                if !self.entries.iter().any(|e| e.day == day) {
                    out.push(ChainViolation::MissingHomeAnchor { day });
                }
            }
        }
        out
    }
}

/// Membership test for POI ids, used by sequence validation.
pub trait PoiLookup {
    fn contains_poi(&self, id: PoiId) -> bool;
}

impl PoiLookup for std::collections::HashSet<PoiId> {
    fn contains_poi(&self, id: PoiId) -> bool {
        self.contains(&id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SequenceViolation {
    /// Starts before the previous staypoint ends.
    Overlap { index: usize },
    /// `end <= start`.
    ReversedInterval { index: usize },
    UnknownPoi { index: usize, poi_id: PoiId },
    /// Belongs to a different agent than the first row.
    ForeignAgent { index: usize, agent_id: AgentId },
    /// Starts earlier than the previous staypoint.
    Unsorted { index: usize },
}

/// Checks one agent's staypoint sequence; an empty report means valid.
pub fn validate_staypoint_sequence(seq: &[Staypoint], pois: Option<&dyn PoiLookup>) -> Vec<SequenceViolation> {
    let mut out = Vec::new();
    let Some(first) = seq.first() else { return out };
    for (i, s) in seq.iter().enumerate() {
        if s.agent_id != first.agent_id {
            out.push(SequenceViolation::ForeignAgent { index: i, agent_id: s.agent_id });
        }
        if s.end <= s.start {
            out.push(SequenceViolation::ReversedInterval { index: i });
        }
        if let Some(lookup) = pois {
            if !lookup.contains_poi(s.poi_id) {
                out.push(SequenceViolation::UnknownPoi { index: i, poi_id: s.poi_id });
            }
        }
        if i > 0 {
            let prev = &seq[i - 1];
            if s.start < prev.start {
                out.push(SequenceViolation::Unsorted { index: i });
            } else if s.start < prev.end {
                out.push(SequenceViolation::Overlap { index: i });
            }
        }
    }
    out
}

/// Splits a time-sorted sequence into train and test parts.
///
/// Stays overlapping the start of train or the end of test are clipped to the
/// window. A stay that starts in train and crosses into test stays whole in
/// train.
pub fn truncate_to_window(
    seq: &[Staypoint],
    clock: &SimClock,
) -> Result<(Vec<Staypoint>, Vec<Staypoint>), DomainError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    let last = clock.window_last();
    for (index, s) in seq.iter().enumerate() {
        if s.end <= clock.train_start() || s.start >= last {
            return Err(DomainError::OutOfWindow { index, start: s.start, end: s.end });
        }
        let mut clipped = *s;
        clipped.start = clipped.start.max(clock.train_start());
        clipped.end = clipped.end.min(last);
        if clipped.start < clock.test_start() {
            train.push(clipped);
        } else {
            test.push(clipped);
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(day: u32, h: u32, m: u32) -> Timestamp {
        Timestamp::local(2024, 1, day, h, m, 0)
    }

    #[test]
    fn sixteen_activity_types_round_trip() {
        let mut seen = std::collections::HashSet::new();
        for a in ActivityType::ALL {
            assert_eq!(a.name().parse::<ActivityType>().unwrap(), a);
            assert_eq!(ActivityType::from_index(a.index()), Some(a));
            seen.insert(a);
        }
        assert_eq!(seen.len(), 16);
        assert!("Sleep".parse::<ActivityType>().is_err());
    }

    #[test]
    fn activity_set_serialization() {
        let s = ActivitySet::of(&[ActivityType::DropOff, ActivityType::Home, ActivityType::Visit]);
        assert_eq!(s.to_delimited(), "Home|Visit|DropOff");
        assert_eq!(ActivitySet::parse_delimited("Home|Visit|DropOff").unwrap(), s);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn timestamp_display_and_parse() {
        let ts: Timestamp = "2024-01-01T08:29:09-08:00".parse().unwrap();
        assert_eq!(ts.to_string(), "2024-01-01T08:29:09-08:00");
        assert_eq!(ts, Timestamp::local(2024, 1, 1, 8, 29, 9));
        let utc: Timestamp = "2024-01-01T16:29:09Z".parse().unwrap();
        assert_eq!(utc, ts);
        assert!("yesterday".parse::<Timestamp>().is_err());
    }

    #[test]
    fn default_clock_spans_eight_weeks() {
        let c = SimClock::default();
        assert_eq!(c.train_start().to_string(), "2024-01-01T00:00:00-08:00");
        assert_eq!(c.test_start(), c.train_end());
        assert_eq!(c.window_last().to_string(), "2024-02-25T23:59:59-08:00");
        assert_eq!(c.train_len(), c.test_len());
        assert_eq!(c.test_end().0 - c.train_start().0, 56 * SECONDS_PER_DAY);
        assert_eq!(c.weekday(1), Weekday::Mon);
        assert_eq!(c.day_of(t(29, 7, 0)), Some(29));
        assert!(SimClock::starting_at(t(1, 3, 0)).is_err());
    }

    #[test]
    fn validation_flags_overlap_and_reversal() {
        let ok = [Staypoint::new(1, 1, t(2, 8, 0), t(2, 9, 0)), Staypoint::new(1, 2, t(2, 9, 30), t(2, 10, 0))];
        assert!(validate_staypoint_sequence(&ok, None).is_empty());

        let overlap = [Staypoint::new(1, 1, t(2, 8, 0), t(2, 9, 0)), Staypoint::new(1, 2, t(2, 8, 30), t(2, 10, 0))];
        assert_eq!(validate_staypoint_sequence(&overlap, None), vec![SequenceViolation::Overlap { index: 1 }]);

        let reversed = [Staypoint::new(1, 1, t(2, 9, 0), t(2, 8, 0))];
        assert_eq!(
            validate_staypoint_sequence(&reversed, None),
            vec![SequenceViolation::ReversedInterval { index: 0 }]
        );

        let known: std::collections::HashSet<PoiId> = [1].into_iter().collect();
        assert_eq!(
            validate_staypoint_sequence(&ok, Some(&known)),
            vec![SequenceViolation::UnknownPoi { index: 1, poi_id: 2 }]
        );
    }

    #[test]
    fn truncation_clips_and_keeps_boundary_stays_in_train() {
        let clock = SimClock::default();
        let seq = [
            Staypoint::new(1, 7, Timestamp::local(2023, 12, 31, 22, 0, 0), t(1, 7, 0)),
            Staypoint::new(1, 8, t(28, 17, 0), t(29, 8, 0)),
            Staypoint::new(1, 9, Timestamp::local(2024, 2, 7, 10, 0, 0), Timestamp::local(2024, 2, 7, 12, 0, 0)),
            Staypoint::new(1, 7, Timestamp::local(2024, 2, 25, 18, 0, 0), Timestamp::local(2024, 2, 26, 7, 0, 0)),
        ];
        let (train, test) = truncate_to_window(&seq, &clock).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(train[0].start, clock.train_start());
        assert_eq!(train[1], seq[1]);
        assert_eq!(test.len(), 2);
        assert_eq!(test[0], seq[2]);
        assert_eq!(test[1].end.to_string(), "2024-02-25T23:59:59-08:00");

        let outside = [Staypoint::new(1, 7, Timestamp::local(2023, 12, 30, 8, 0, 0), Timestamp::local(2023, 12, 30, 9, 0, 0))];
        assert!(matches!(truncate_to_window(&outside, &clock), Err(DomainError::OutOfWindow { index: 0, .. })));
    }

    #[test]
    fn label_columns_must_agree() {
        assert_eq!(AnomalyLabel::from_columns(true, 2).unwrap(), AnomalyLabel::Injected);
        assert!(AnomalyLabel::from_columns(false, 1).is_err());
        assert!(AnomalyLabel::from_columns(true, 0).is_err());
        assert!(AnomalyLabel::from_code(3).is_err());
    }
}

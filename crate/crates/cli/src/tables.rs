//! Record types to and from [`Table`]s.

use std::path::Path;

use staysim_core::assign::{AssignedChain, AssignedEntry};
use staysim_core::detect::{Level, ScoredItem};
use staysim_core::domain::{ActivityChain, ActivitySet, AgeBand, AnomalyLabel, ChainEntry, Demographics};
use staysim_core::{AgentRecord, PoiRecord, Staypoint, Timestamp};

use crate::io::{col, read_table, write_table, Column, ColumnSpec, ColumnType::*, Format, IoError, Table};

pub const STAYPOINTS: [ColumnSpec; 4] = [
    col("agent_id", I64),
    col("poi_id", I64),
    col("start_datetime", Str),
    col("end_datetime", Str),
];

pub const ANOMALOUS: [ColumnSpec; 6] = [
    col("agent_id", I64),
    col("poi_id", I64),
    col("start_datetime", Str),
    col("end_datetime", Str),
    col("anomaly", Bool),
    col("anomaly_type", I64),
];

pub const POI: [ColumnSpec; 5] = [
    col("poi_id", I64),
    col("name", Str),
    col("latitude", F64),
    col("longitude", F64),
    col("act_types", Str),
];

pub const DEMOGRAPHICS: [ColumnSpec; 5] = [
    col("agent_id", I64),
    col("age_band", Str),
    col("household_size", I64),
    col("worker", Bool),
    col("student", Bool),
];

pub const AGENTS: [ColumnSpec; 3] = [col("agent_id", I64), col("home_poi_id", I64), col("work_poi_id", OptI64)];

pub const CHAINS: [ColumnSpec; 5] = [
    col("agent_id", I64),
    col("day", I64),
    col("activity", Str),
    col("start_min", I64),
    col("end_min", I64),
];

pub const ASSIGNED: [ColumnSpec; 6] = [
    col("agent_id", I64),
    col("day", I64),
    col("activity", Str),
    col("start_min", I64),
    col("end_min", I64),
    col("poi_id", I64),
];

pub const SCORES: [ColumnSpec; 4] = [
    col("level", Str),
    col("agent_id", I64),
    col("staypoint_index", OptI64),
    col("score", F64),
];

fn cell_err(path: &Path, row: usize, column: &str, message: impl ToString) -> IoError {
    IoError::Cell { path: path.to_path_buf(), row, column: column.to_string(), message: message.to_string() }
}

fn to_u32(path: &Path, row: usize, column: &str, v: i64) -> Result<u32, IoError> {
    u32::try_from(v).map_err(|_| cell_err(path, row, column, format!("{v} is out of range")))
}

fn to_u16(path: &Path, row: usize, column: &str, v: i64) -> Result<u16, IoError> {
    u16::try_from(v).map_err(|_| cell_err(path, row, column, format!("{v} is out of range")))
}

fn to_time(path: &Path, row: usize, column: &str, v: &str) -> Result<Timestamp, IoError> {
    v.parse().map_err(|e| cell_err(path, row, column, e))
}

/// Writes staypoints with the four base columns, plus the label columns when `labeled`.
pub fn write_staypoints(path: &Path, format: Format, rows: &[Staypoint], labeled: bool) -> Result<(), IoError> {
    let mut columns = vec![
        Column::I64(rows.iter().map(|s| s.agent_id as i64).collect()),
        Column::I64(rows.iter().map(|s| s.poi_id as i64).collect()),
        Column::Str(rows.iter().map(|s| s.start.to_string()).collect()),
        Column::Str(rows.iter().map(|s| s.end.to_string()).collect()),
    ];
    let table = if labeled {
        columns.push(Column::Bool(rows.iter().map(Staypoint::anomaly).collect()));
        columns.push(Column::I64(rows.iter().map(|s| s.label.code() as i64).collect()));
        Table::new("stay_points", &ANOMALOUS, columns)?
    } else {
        Table::new("stay_points", &STAYPOINTS, columns)?
    };
    write_table(path, format, &table)
}

pub fn read_staypoints(path: &Path, format: Format, labeled: bool) -> Result<Vec<Staypoint>, IoError> {
    let schema: &[ColumnSpec] = if labeled { &ANOMALOUS } else { &STAYPOINTS };
    let t = read_table(path, format, "stay_points", schema)?;
    let (agents, pois) = (t.i64s("agent_id"), t.i64s("poi_id"));
    let (starts, ends) = (t.strs("start_datetime"), t.strs("end_datetime"));
    (0..t.n_rows())
        .map(|i| {
            let mut s = Staypoint::new(
                to_u32(path, i, "agent_id", agents[i])?,
                to_u32(path, i, "poi_id", pois[i])?,
                to_time(path, i, "start_datetime", &starts[i])?,
                to_time(path, i, "end_datetime", &ends[i])?,
            );
            if labeled {
                let code = u8::try_from(t.i64s("anomaly_type")[i])
                    .map_err(|_| cell_err(path, i, "anomaly_type", "out of range"))?;
                s.label = AnomalyLabel::from_columns(t.bools("anomaly")[i], code)
                    .map_err(|e| cell_err(path, i, "anomaly_type", e))?;
            }
            Ok(s)
        })
        .collect()
}

pub fn write_pois(path: &Path, format: Format, rows: &[PoiRecord]) -> Result<(), IoError> {
    let mut seen = std::collections::HashSet::with_capacity(rows.len());
    if let Some(i) = rows.iter().position(|p| !seen.insert(p.poi_id)) {
        return Err(cell_err(path, i, "poi_id", format!("duplicate poi_id {}", rows[i].poi_id)));
    }
    let table = Table::new(
        "poi",
        &POI,
        vec![
            Column::I64(rows.iter().map(|p| p.poi_id as i64).collect()),
            Column::Str(rows.iter().map(|p| p.name.clone()).collect()),
            Column::F64(rows.iter().map(|p| p.latitude).collect()),
            Column::F64(rows.iter().map(|p| p.longitude).collect()),
            Column::Str(rows.iter().map(|p| p.act_types.to_delimited()).collect()),
        ],
    )?;
    write_table(path, format, &table)
}

pub fn read_pois(path: &Path, format: Format) -> Result<Vec<PoiRecord>, IoError> {
    let t = read_table(path, format, "poi", &POI)?;
    (0..t.n_rows())
        .map(|i| {
            Ok(PoiRecord {
                poi_id: to_u32(path, i, "poi_id", t.i64s("poi_id")[i])?,
                name: t.strs("name")[i].clone(),
                latitude: t.f64s("latitude")[i],
                longitude: t.f64s("longitude")[i],
                act_types: ActivitySet::parse_delimited(&t.strs("act_types")[i])
                    .map_err(|e| cell_err(path, i, "act_types", e))?,
            })
        })
        .collect()
}

pub fn write_demographics(path: &Path, format: Format, agents: &[AgentRecord]) -> Result<(), IoError> {
    let table = Table::new(
        "demographics",
        &DEMOGRAPHICS,
        vec![
            Column::I64(agents.iter().map(|a| a.agent_id as i64).collect()),
            Column::Str(agents.iter().map(|a| a.demographics.age_band.label().to_string()).collect()),
            Column::I64(agents.iter().map(|a| a.demographics.household_size as i64).collect()),
            Column::Bool(agents.iter().map(|a| a.demographics.worker).collect()),
            Column::Bool(agents.iter().map(|a| a.demographics.student).collect()),
        ],
    )?;
    write_table(path, format, &table)
}

pub fn read_demographics(path: &Path, format: Format) -> Result<Vec<(u32, Demographics)>, IoError> {
    let t = read_table(path, format, "demographics", &DEMOGRAPHICS)?;
    (0..t.n_rows())
        .map(|i| {
            let age_band: AgeBand = t.strs("age_band")[i].parse().map_err(|e| cell_err(path, i, "age_band", e))?;
            let household_size = u8::try_from(t.i64s("household_size")[i])
                .map_err(|_| cell_err(path, i, "household_size", "out of range"))?;
            Ok((
                to_u32(path, i, "agent_id", t.i64s("agent_id")[i])?,
                Demographics { age_band, household_size, worker: t.bools("worker")[i], student: t.bools("student")[i] },
            ))
        })
        .collect()
}

/// Home and work anchors; demographics live in their own file.
pub fn write_agents(path: &Path, format: Format, agents: &[AgentRecord]) -> Result<(), IoError> {
    let table = Table::new(
        "agents",
        &AGENTS,
        vec![
            Column::I64(agents.iter().map(|a| a.agent_id as i64).collect()),
            Column::I64(agents.iter().map(|a| a.home_poi as i64).collect()),
            Column::OptI64(agents.iter().map(|a| a.work_poi.map(i64::from)).collect()),
        ],
    )?;
    write_table(path, format, &table)
}

/// Joins the anchors file with demographics; both must list the same agents in the same order.
pub fn read_agents(agents_path: &Path, demographics_path: &Path, format: Format) -> Result<Vec<AgentRecord>, IoError> {
    let t = read_table(agents_path, format, "agents", &AGENTS)?;
    let demo = read_demographics(demographics_path, format)?;
    if demo.len() != t.n_rows() {
        return Err(cell_err(
            demographics_path,
            demo.len().min(t.n_rows()),
            "agent_id",
            format!("{} demographic rows for {} agents", demo.len(), t.n_rows()),
        ));
    }
    (0..t.n_rows())
        .map(|i| {
            let agent_id = to_u32(agents_path, i, "agent_id", t.i64s("agent_id")[i])?;
            let (demo_id, demographics) = demo[i];
            if demo_id != agent_id {
                return Err(cell_err(demographics_path, i, "agent_id", format!("{demo_id} != {agent_id}")));
            }
            Ok(AgentRecord {
                agent_id,
                demographics,
                home_poi: to_u32(agents_path, i, "home_poi_id", t.i64s("home_poi_id")[i])?,
                work_poi: t.opt_i64s("work_poi_id")[i]
                    .map(|w| to_u32(agents_path, i, "work_poi_id", w))
                    .transpose()?,
            })
        })
        .collect()
}

fn entry_columns<'a>(rows: impl Iterator<Item = (u32, &'a ChainEntry)> + Clone) -> Vec<Column> {
    vec![
        Column::I64(rows.clone().map(|(a, _)| a as i64).collect()),
        Column::I64(rows.clone().map(|(_, e)| e.day as i64).collect()),
        Column::Str(rows.clone().map(|(_, e)| e.activity.name().to_string()).collect()),
        Column::I64(rows.clone().map(|(_, e)| e.start_min as i64).collect()),
        Column::I64(rows.map(|(_, e)| e.end_min as i64).collect()),
    ]
}

fn read_entries(path: &Path, t: &Table) -> Result<Vec<(u32, ChainEntry)>, IoError> {
    (0..t.n_rows())
        .map(|i| {
            Ok((
                to_u32(path, i, "agent_id", t.i64s("agent_id")[i])?,
                ChainEntry {
                    day: to_u16(path, i, "day", t.i64s("day")[i])?,
                    activity: t.strs("activity")[i].parse().map_err(|e| cell_err(path, i, "activity", e))?,
                    start_min: to_u16(path, i, "start_min", t.i64s("start_min")[i])?,
                    end_min: to_u16(path, i, "end_min", t.i64s("end_min")[i])?,
                },
            ))
        })
        .collect()
}

/// Consecutive rows with the same agent id form one chain.
fn group_by_agent<T>(rows: Vec<(u32, T)>) -> Vec<(u32, Vec<T>)> {
    let mut out: Vec<(u32, Vec<T>)> = Vec::new();
    for (agent, item) in rows {
        match out.last_mut() {
            Some((a, items)) if *a == agent => items.push(item),
            _ => out.push((agent, vec![item])),
        }
    }
    out
}

pub fn write_chains(path: &Path, format: Format, chains: &[ActivityChain]) -> Result<(), IoError> {
    let rows = chains.iter().flat_map(|c| c.entries.iter().map(move |e| (c.agent_id, e)));
    write_table(path, format, &Table::new("chains", &CHAINS, entry_columns(rows))?)
}

pub fn read_chains(path: &Path, format: Format) -> Result<Vec<ActivityChain>, IoError> {
    let t = read_table(path, format, "chains", &CHAINS)?;
    Ok(group_by_agent(read_entries(path, &t)?)
        .into_iter()
        .map(|(agent_id, entries)| ActivityChain { agent_id, entries })
        .collect())
}

pub fn write_assigned(path: &Path, format: Format, chains: &[AssignedChain]) -> Result<(), IoError> {
    let rows = chains.iter().flat_map(|c| c.entries.iter().map(move |e| (c.agent_id, &e.entry)));
    let mut columns = entry_columns(rows);
    columns.push(Column::I64(chains.iter().flat_map(|c| c.entries.iter().map(|e| e.poi_id as i64)).collect()));
    write_table(path, format, &Table::new("assigned", &ASSIGNED, columns)?)
}

pub fn read_assigned(path: &Path, format: Format) -> Result<Vec<AssignedChain>, IoError> {
    let t = read_table(path, format, "assigned", &ASSIGNED)?;
    let pois = t.i64s("poi_id");
    let rows = read_entries(path, &t)?
        .into_iter()
        .enumerate()
        .map(|(i, (agent, entry))| Ok((agent, AssignedEntry { entry, poi_id: to_u32(path, i, "poi_id", pois[i])? })))
        .collect::<Result<Vec<_>, IoError>>()?;
    Ok(group_by_agent(rows)
        .into_iter()
        .map(|(agent_id, entries)| AssignedChain { agent_id, entries })
        .collect())
}

pub fn write_scores(path: &Path, format: Format, scores: &[ScoredItem]) -> Result<(), IoError> {
    let table = Table::new(
        "scores",
        &SCORES,
        vec![
            Column::Str(scores.iter().map(|s| s.level.to_string()).collect()),
            Column::I64(scores.iter().map(|s| s.agent_id as i64).collect()),
            Column::OptI64(scores.iter().map(|s| s.staypoint_index.map(|k| k as i64)).collect()),
            Column::F64(scores.iter().map(|s| s.score).collect()),
        ],
    )?;
    write_table(path, format, &table)
}

pub fn read_scores(path: &Path, format: Format) -> Result<Vec<ScoredItem>, IoError> {
    let t = read_table(path, format, "scores", &SCORES)?;
    (0..t.n_rows())
        .map(|i| {
            let level: Level = t.strs("level")[i].parse().map_err(|e| cell_err(path, i, "level", e))?;
            let staypoint_index = t.opt_i64s("staypoint_index")[i]
                .map(|k| usize::try_from(k).map_err(|_| cell_err(path, i, "staypoint_index", "negative")))
                .transpose()?;
            Ok(ScoredItem {
                level,
                agent_id: to_u32(path, i, "agent_id", t.i64s("agent_id")[i])?,
                staypoint_index,
                score: t.f64s("score")[i],
            })
        })
        .collect()
}

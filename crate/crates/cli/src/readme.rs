//! Text of the generated `readme.txt`.

use std::fmt::Write;

use crate::io::{ColumnSpec, Format};
use crate::tables::{ANOMALOUS, DEMOGRAPHICS, POI, STAYPOINTS};

fn describe(name: &str) -> &'static str {
    match name {
        "agent_id" => "integer id of the simulated agent",
        "poi_id" => "integer id of the point of interest, a key into the poi file",
        "start_datetime" => "arrival time, ISO-8601 with explicit -08:00 offset",
        "end_datetime" => "departure time, ISO-8601 with explicit -08:00 offset",
        "anomaly" => "true if the row is part of an injected anomaly",
        "anomaly_type" => "0 = unchanged, 1 = truth row whose times were altered, 2 = inserted row",
        "name" => "display name; empty string when the place is unnamed",
        "latitude" => "WGS84 latitude in degrees",
        "longitude" => "WGS84 longitude in degrees",
        "act_types" => "activity types the place supports, '|'-separated canonical names",
        "age_band" => "age band: 0-17, 18-34, 35-54, 55-64 or 65+",
        "household_size" => "number of people in the agent's household",
        "worker" => "true if the agent has a workplace",
        "student" => "true if the agent attends school",
        _ => "",
    }
}

fn section(out: &mut String, file: &str, about: &str, columns: &[ColumnSpec]) {
    let _ = writeln!(out, "{file}\n  {about}");
    for c in columns {
        let _ = writeln!(out, "  - {}: {}", c.name, describe(c.name));
    }
    out.push('\n');
}

pub fn readme_text(format: Format) -> String {
    let ext = format.extension();
    let mut out = String::new();
    out.push_str("Synthetic staypoint dataset\n\n");
    out.push_str("Eight weeks of simulated stays per agent. The first four weeks form the train\n");
    out.push_str("window, the last four the test window. A stay that begins in train and ends in\n");
    out.push_str("test is kept whole in the train file. All times are local at UTC-08:00.\n\n");
    out.push_str("readme.txt\n  This file.\n\n");
    section(&mut out, &format!("demographics.{ext}"), "One row per agent.", &DEMOGRAPHICS);
    section(&mut out, &format!("poi.{ext}"), "One row per point of interest.", &POI);
    section(&mut out, &format!("stay_points_train.{ext}"), "Stays in the train window.", &STAYPOINTS);
    section(
        &mut out,
        &format!("stay_points_test_truth.{ext}"),
        "Stays in the test window, without anomalies.",
        &STAYPOINTS,
    );
    section(
        &mut out,
        &format!("stay_points_test_anomalous.{ext}"),
        "The test window with anomalies injected for a few agents.",
        &ANOMALOUS,
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_column_is_described() {
        for spec in DEMOGRAPHICS.iter().chain(&POI).chain(&ANOMALOUS) {
            assert!(!describe(spec.name).is_empty(), "{}", spec.name);
        }
        let text = readme_text(Format::Csv);
        assert!(text.contains("stay_points_test_anomalous.csv"));
        assert!(text.contains("- anomaly_type:"));
    }
}

//! Report files.
//!
//! `report.csv` has one row per layer per timestep with the columns
//! `layer,kind,timestep,active_inputs,accumulates,updates,output_spikes,cycles`.
//! `report.json` is the serialized [`SimReport`].

use std::fs;
use std::path::Path;

use super::sim::SimReport;
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 8] = [
    "layer",
    "kind",
    "timestep",
    "active_inputs",
    "accumulates",
    "updates",
    "output_spikes",
    "cycles",
];

pub fn report_csv(report: &SimReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for l in &report.layers {
        for (t, s) in l.steps.iter().enumerate() {
            w.write_record([
                l.layer.to_string(),
                l.kind.clone(),
                t.to_string(),
                s.active_inputs.to_string(),
                s.accumulates.to_string(),
                s.updates.to_string(),
                s.output_spikes.to_string(),
                s.cycles.to_string(),
            ])?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_report(report: &SimReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("report.json");
    fs::write(&json, serde_json::to_string_pretty(report)? + "\n").map_err(|e| Error::io(&json, e))?;
    let csv = dir.join("report.csv");
    fs::write(&csv, report_csv(report)?).map_err(|e| Error::io(&csv, e))
}

//! JSON and CSV serialization of [`VcdReport`]s.
//!
//! JSON: `{variant, config, frames: [{i, amp, phase, weight, total}], sum, mean}`.
//! CSV: header `i,amp,phase,weight,total`, one row per evaluated frame.
//! Field order is fixed by the struct definitions, and floats are printed
//! in shortest round-trip form, so equal reports serialize to equal bytes.

use std::fs;
use std::path::Path;

use crate::metrics::VcdReport;
use crate::{Result, VcdError};

pub fn to_json(report: &VcdReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<VcdReport> {
    serde_json::from_str(text).map_err(|e| VcdError::Parse(format!("report JSON: {e}")))
}

pub fn to_csv(report: &VcdReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for frame in &report.frames {
        w.serialize(frame).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

pub fn write_json(path: impl AsRef<Path>, report: &VcdReport) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(report)).map_err(|e| VcdError::io(path, e))
}

pub fn write_csv(path: impl AsRef<Path>, report: &VcdReport) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_csv(report)).map_err(|e| VcdError::io(path, e))
}

//! CSV files with a provenance comment line followed by a header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::LabError;

/// Provenance line: tool version plus the invocation with output paths
/// elided, so reruns into different directories produce identical files.
pub fn provenance(command: &str, args: &[(&str, String)]) -> String {
    let mut s = format!("lsa-lab {} {command}", env!("CARGO_PKG_VERSION"));
    for (k, v) in args {
        s.push_str(&format!(" --{k} {v}"));
    }
    s
}

pub struct CsvTable {
    pub provenance: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(provenance: String, header: &[&str]) -> Self {
        Self { provenance, header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<(), LabError> {
        let mut out = out;
        writeln!(out, "# {}", self.provenance).map_err(|e| LabError::Io(e.to_string()))?;
        let mut w = csv::Writer::from_writer(out);
        let bad = |e: csv::Error| LabError::Io(e.to_string());
        w.write_record(&self.header).map_err(bad)?;
        for r in &self.rows {
            w.write_record(r).map_err(bad)?;
        }
        w.flush().map_err(|e| LabError::Io(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), LabError> {
        let f = File::create(path).map_err(|e| LabError::io(path, e))?;
        self.write_to(BufWriter::new(f))
    }
}

/// Shortest round-trip formatting; `inf` and `NaN` kept readable.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), LabError> {
    std::fs::write(path, text).map_err(|e| LabError::io(path, e))
}

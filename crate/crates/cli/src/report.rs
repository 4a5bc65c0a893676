//! Report envelopes and the two output formats.

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Bumped whenever a report's JSON shape changes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: &'static str,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(role: &'static str, bytes: &[u8]) -> Self {
        let digest = Sha256::digest(bytes);
        InputDigest { role, sha256: digest.iter().map(|b| format!("{b:02x}")).collect() }
    }
}

/// A flat table: one row per attack, step, service or round.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub struct Report {
    pub command: &'static str,
    pub inputs: Vec<InputDigest>,
    pub parameters: Value,
    pub result: Value,
    pub table: Table,
}

impl Report {
    pub fn to_json(&self) -> String {
        let doc = json!({
            "schema_version": REPORT_SCHEMA_VERSION,
            "tool": { "name": "restake", "version": env!("CARGO_PKG_VERSION") },
            "command": self.command,
            "inputs": self.inputs,
            "parameters": self.parameters,
            "result": self.result,
        });
        let mut out = serde_json::to_string_pretty(&doc).expect("reports always serialize");
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.table.header).expect("in-memory write");
        for row in &self.table.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

pub fn value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result types always serialize")
}

/// `0;2;5`
pub fn ids(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

pub fn num(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else if x > 0.0 {
        "inf".into()
    } else if x < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

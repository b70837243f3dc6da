//! Results-file writers.
//!
//! Both formats carry the same table: a fixed, documented column order and
//! one row per configuration, with the full resolved configuration embedded
//! so any row can be reproduced from the file alone.
//!
//! * CSV (version 1): a `# format=results version=1 config={...}` comment
//!   line, the header line, then the data rows.
//! * JSON (version 1): `{"format": "results", "version": 1, "config": ...,
//!   "columns": [...], "rows": [[...]]}` with rows mirroring the CSV order.

use anyhow::{Context, Result};
use serde_json::Value;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

pub const RESULTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct ResultsTable {
    pub config: Value,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Value>>,
}

impl ResultsTable {
    pub fn write(&self, format: Format, out: Option<&Path>) -> Result<()> {
        match out {
            Some(path) => {
                let file =
                    File::create(path).with_context(|| format!("creating {}", path.display()))?;
                self.write_to(format, file)
            }
            None => self.write_to(format, io::stdout().lock()),
        }
    }

    fn write_to<W: Write>(&self, format: Format, mut w: W) -> Result<()> {
        match format {
            Format::Csv => {
                writeln!(
                    w,
                    "# format=results version={RESULTS_FORMAT_VERSION} config={}",
                    self.config
                )?;
                writeln!(w, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    debug_assert_eq!(row.len(), self.columns.len());
                    let cells: Vec<String> = row.iter().map(render_csv_cell).collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
            }
            Format::Json => {
                let doc = serde_json::json!({
                    "format": "results",
                    "version": RESULTS_FORMAT_VERSION,
                    "config": self.config,
                    "columns": self.columns,
                    "rows": self.rows,
                });
                writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
            }
        }
        Ok(())
    }
}

fn render_csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn open_out(path: &PathBuf) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

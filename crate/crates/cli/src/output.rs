//! CSV tables and JSON sidecars.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::Failure;

pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    fn write<W: Write>(&self, sink: W) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation in scientific notation.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes the table to `output` with a sidecar, or to stdout.
pub fn emit<C: Serialize>(command: &str, config: &C, table: &Table, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        None => table.write(std::io::stdout().lock()),
        Some(path) => {
            let sidecar = sidecar_path(path);
            if sidecar == path {
                return Err(Failure::Usage("output must not have a .json extension".into()));
            }
            let file = std::fs::File::create(path)?;
            table.write(std::io::BufWriter::new(file))?;
            let echo = json!({
                "command": command,
                "version": env!("CARGO_PKG_VERSION"),
                "library-version": laserclock::VERSION,
                "csv": path.file_name().map(|s| s.to_string_lossy().into_owned()),
                "rows": table.len(),
                "config": config,
            });
            let mut text = serde_json::to_string_pretty(&echo).map_err(|e| Failure::Io(e.to_string()))?;
            text.push('\n');
            std::fs::write(sidecar, text)?;
            Ok(())
        }
    }
}

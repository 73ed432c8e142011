//! Delimited tables and the JSON manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::Format;

pub const UNITS: &str = "# units: rad/s for couplings, fields and frequencies; s for times; energies in units of J where marked";

/// A table whose rows are already formatted, in sweep order.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Table { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, mut out: W, format: Format) -> anyhow::Result<()> {
        writeln!(out, "{UNITS}")?;
        let mut w = csv::WriterBuilder::new().delimiter(format.delimiter()).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, dir: &Path, format: Format) -> anyhow::Result<PathBuf> {
        let path = dir.join(format!("{}.{}", self.name, format.extension()));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.write_to(BufWriter::new(file), format)?;
        Ok(path)
    }
}

/// Shortest round-trip representation, so identical inputs give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Band-scale quantities recorded in every manifest that has a model.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DerivedRecord {
    pub t_m: f64,
    /// At `P theta = pi`.
    pub t_mu: f64,
    pub t_nu: f64,
    pub omega: f64,
    pub beta: Option<i32>,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: &'a str,
    pub config: &'a C,
    pub derived: Option<DerivedRecord>,
    pub summary: serde_json::Value,
    pub tables: Vec<String>,
    pub started_unix_s: u64,
    pub elapsed_s: f64,
}

impl<C: Serialize> Manifest<'_, C> {
    pub fn save(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_units_and_header() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![num(0.1), opt::<u32>(None)]);
        let mut buf = Vec::new();
        t.write_to(&mut buf, Format::Tsv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines, [UNITS, "a\tb", "0.1\t"]);
    }
}

//! Tabular artifacts and their CSV/JSON encodings.
//!
//! Every subcommand produces one [`Table`] with a fixed column order. CSV has
//! a single header row. JSON is an array of objects with the same keys in
//! the same order. Numbers use the shortest representation that round-trips.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Rejects rows of the wrong width and non-finite numbers.
    pub fn check(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                bail!("row {i} has {} cells, expected {}", row.len(), self.columns.len());
            }
            for (c, cell) in self.columns.iter().zip(row) {
                if let Cell::Num(v) = cell {
                    if !v.is_finite() {
                        bail!("row {i}, column `{c}`: non-finite value {v}");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of one column.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column(name)?;
        self.rows
            .iter()
            .map(|r| match r[k] {
                Cell::Num(v) => Some(v),
                Cell::Text(_) => None,
            })
            .collect()
    }

    pub fn encode(&self, format: Format) -> Result<Vec<u8>> {
        self.check()?;
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell_text))?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    fn to_json(&self) -> Result<Vec<u8>> {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let m: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().map(cell_value)).collect();
                Value::Object(m)
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&records)?;
        out.push(b'\n');
        Ok(out)
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Text(s) => s.clone(),
        Cell::Num(v) => number(*v).to_string(),
    }
}

fn cell_value(c: &Cell) -> Value {
    match c {
        Cell::Text(s) => Value::String(s.clone()),
        Cell::Num(v) => number(*v),
    }
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).expect("checked finite")
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename,
/// so the target is either absent, untouched or complete.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().with_context(|| format!("{} is not a file path", path.display()))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| -> io::Result<()> {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(e).with_context(|| format!("cannot write {}", path.display()));
    }
    Ok(())
}

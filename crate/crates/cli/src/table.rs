//! Rectangular result tables and their CSV / JSON encodings.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Text(_) => None,
        }
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => f.write_str(&fmt_float(*x)),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x as i64)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Text(x.to_string())
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Text(x.to_string())
    }
}

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Text(x)
    }
}

/// Ordered, uniquely named columns over rectangular rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Result<Self> {
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                bail!("duplicate column `{c}`");
            }
        }
        Ok(Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        })
    }

    pub fn push(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.columns.len() {
            bail!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            );
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.into_inner().context("flushing CSV")
    }

    /// `{"columns": [...], "rows": [[...], ...]}`; non-finite floats become
    /// `null`.
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let rows: Vec<Vec<serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| match v {
                        Value::Int(i) => serde_json::Value::from(*i),
                        Value::Float(x) => serde_json::Number::from_f64(*x)
                            .map(serde_json::Value::Number)
                            .unwrap_or(serde_json::Value::Null),
                        Value::Text(s) => serde_json::Value::from(s.as_str()),
                    })
                    .collect()
            })
            .collect();
        #[derive(Serialize)]
        struct Doc<'a> {
            columns: &'a [String],
            rows: Vec<Vec<serde_json::Value>>,
        }
        let mut out = serde_json::to_vec_pretty(&Doc {
            columns: &self.columns,
            rows,
        })?;
        out.push(b'\n');
        Ok(out)
    }

    /// Writes `<dir>/<stem>.<ext>` and returns the file name.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<String> {
        let name = format!("{stem}.{}", format.extension());
        let bytes = match format {
            Format::Csv => self.to_csv()?,
            Format::Json => self.to_json()?,
        };
        write_bytes(&dir.join(&name), &bytes)?;
        Ok(name)
    }

    /// Reads a CSV written by [`Table::to_csv`]; numeric-looking cells are
    /// parsed as floats (or integers when they contain no `.`/`e`).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut table = Table {
            columns,
            rows: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec?;
            let row = rec.iter().map(parse_cell).collect();
            table.push(row)?;
        }
        Ok(table)
    }

    pub fn float(&self, row: usize, column: &str) -> Option<f64> {
        self.rows.get(row)?.get(self.column(column)?)?.as_f64()
    }

    pub fn text(&self, row: usize, column: &str) -> Option<String> {
        Some(self.rows.get(row)?.get(self.column(column)?)?.to_string())
    }
}

fn parse_cell(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        return Value::Int(i);
    }
    match s {
        "NaN" => return Value::Float(f64::NAN),
        "inf" => return Value::Float(f64::INFINITY),
        "-inf" => return Value::Float(f64::NEG_INFINITY),
        _ => {}
    }
    match s.parse::<f64>() {
        Ok(x) => Value::Float(x),
        Err(_) => Value::Text(s.to_string()),
    }
}

pub fn write_bytes(path: &PathBuf, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_csv() {
        let mut t = Table::new(&["a", "b", "c"]).unwrap();
        let x = 0.1 + 0.2;
        t.push(vec![x.into(), 3usize.into(), "ok".into()]).unwrap();
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "a,b,c\n3.0000000000000004e-1,3,ok\n");
        let back: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn shape_contract() {
        assert!(Table::new(&["a", "a"]).is_err());
        let mut t = Table::new(&["a"]).unwrap();
        assert!(t.push(vec![]).is_err());
    }

    #[test]
    fn json_keeps_column_order() {
        let mut t = Table::new(&["z", "a"]).unwrap();
        t.push(vec![f64::NAN.into(), 1usize.into()]).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&t.to_json().unwrap()).unwrap();
        assert_eq!(v["columns"], serde_json::json!(["z", "a"]));
        assert_eq!(v["rows"][0], serde_json::json!([null, 1]));
    }
}

//! Writing tables and reports with their reproducibility metadata.
//!
//! Tables go out as CSV (or a JSON array of records with `--format json`),
//! reports as pretty JSON with a `meta` field. A file written with `--out`
//! gets a `<file>.meta.json` sidecar; tables on stdout echo the metadata to
//! stderr instead.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use spectra_core::config::RunMeta;
use spectra_core::io::{write_csv_rows, write_json};

use crate::Format;

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn to_json(&self) -> Value {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, v)| (h.to_string(), json!(v)))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(records)
    }

    fn render(&self, format: Format) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        match format {
            Format::Csv => write_csv_rows(&mut buf, &self.header, &self.rows)?,
            Format::Json => {
                serde_json::to_writer_pretty(&mut buf, &self.to_json())?;
                buf.push(b'\n');
            }
        }
        Ok(buf)
    }
}

pub fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    s.into()
}

pub fn write_table(table: &Table, format: Format, out: Option<&Path>, meta: &RunMeta) -> Result<()> {
    let bytes = table.render(format)?;
    match out {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
            write_json(meta, &meta_path(path))?;
        }
        None => {
            std::io::stdout().write_all(&bytes)?;
            eprintln!("meta: {}", serde_json::to_string(meta)?);
        }
    }
    Ok(())
}

/// Pretty JSON of `value` with `meta` added at the top level.
pub fn report_json<T: Serialize>(value: &T, meta: &RunMeta) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("meta".into(), serde_json::to_value(meta)?);
        }
        None => v = json!({ "result": v, "meta": meta }),
    }
    Ok(v)
}

pub fn write_report<T: Serialize>(value: &T, out: Option<&Path>, meta: &RunMeta) -> Result<()> {
    let v = report_json(value, meta)?;
    match out {
        Some(path) => {
            write_json(&v, path).with_context(|| format!("writing {}", path.display()))?;
            write_json(meta, &meta_path(path))?;
        }
        None => println!("{}", serde_json::to_string_pretty(&v)?),
    }
    Ok(())
}

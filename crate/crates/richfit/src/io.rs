//! CSV and JSON files.
//!
//! Path tables come in two layouts:
//!
//! - `wide`: header row, first column time, one column per path;
//! - `long`: header row, columns `path_id,time,value`, rows grouped in any
//!   order but with increasing times inside each path.
//!
//! Floating-point cells are written with 17 significant digits, which
//! round-trips every double exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use richfit_core::diffusion::SamplePaths;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Bumped whenever a JSON field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Wide,
    Long,
}

/// Formats a double with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn cell_error(path: &Path, line: usize, column: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: line {line}, column {column}: {msg}", path.display()))
}

fn parse_cell(path: &Path, line: usize, column: usize, text: &str) -> Result<f64, CliError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| cell_error(path, line, column, format!("`{text}` is not a finite number")))
}

fn positive_cell(path: &Path, line: usize, column: usize, text: &str) -> Result<f64, CliError> {
    let v = parse_cell(path, line, column, text)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(cell_error(path, line, column, format!("value {v} is not positive")))
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Validation(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

/// Reads sample paths. Line numbers in errors count the header as line 1;
/// columns are 1-based.
pub fn ingest_csv(path: &Path, layout: Layout) -> Result<SamplePaths, CliError> {
    let mut rdr = reader(path)?;
    let n_cols = rdr
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: cannot read header: {e}", path.display())))?
        .len();
    let records = rdr
        .records()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| cell_error(path, i + 2, 1, e)))
        .collect::<Result<Vec<_>, _>>()?;
    if records.is_empty() {
        return Err(CliError::Validation(format!("{}: no data rows", path.display())));
    }
    match layout {
        Layout::Wide => ingest_wide(path, n_cols, &records),
        Layout::Long => ingest_long(path, n_cols, &records),
    }
}

fn ingest_wide(path: &Path, n_cols: usize, records: &[csv::StringRecord]) -> Result<SamplePaths, CliError> {
    if n_cols < 2 {
        return Err(CliError::Validation(format!(
            "{}: wide layout needs a time column and at least one path column",
            path.display()
        )));
    }
    let mut grid = Vec::with_capacity(records.len());
    let mut paths = vec![Vec::with_capacity(records.len()); n_cols - 1];
    for (i, rec) in records.iter().enumerate() {
        let line = i + 2;
        if rec.len() != n_cols {
            return Err(cell_error(path, line, rec.len().min(n_cols) + 1, format!("expected {n_cols} cells, found {}", rec.len())));
        }
        let t = parse_cell(path, line, 1, &rec[0])?;
        if let Some(&prev) = grid.last() {
            if !(t > prev) {
                return Err(cell_error(path, line, 1, format!("time {t} does not increase (previous {prev})")));
            }
        }
        grid.push(t);
        for (c, path_values) in paths.iter_mut().enumerate() {
            path_values.push(positive_cell(path, line, c + 2, &rec[c + 1])?);
        }
    }
    Ok(SamplePaths::on_grid(grid, paths)?)
}

fn ingest_long(path: &Path, n_cols: usize, records: &[csv::StringRecord]) -> Result<SamplePaths, CliError> {
    if n_cols != 3 {
        return Err(CliError::Validation(format!(
            "{}: long layout needs exactly the columns path_id,time,value",
            path.display()
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut times: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let line = i + 2;
        if rec.len() != 3 {
            return Err(cell_error(path, line, rec.len().min(3) + 1, format!("expected 3 cells, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            times.push(Vec::new());
            values.push(Vec::new());
            order.len() - 1
        });
        let t = parse_cell(path, line, 2, &rec[1])?;
        if let Some(&prev) = times[slot].last() {
            if !(t > prev) {
                return Err(cell_error(path, line, 2, format!("time {t} does not increase within path `{id}` (previous {prev})")));
            }
        }
        times[slot].push(t);
        values[slot].push(positive_cell(path, line, 3, &rec[2])?);
    }
    Ok(SamplePaths::new(times, values)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
    }
    let file = File::create(path).map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn write_failed(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("cannot write {}: {e}", path.display()))
}

/// Writes a numeric table with the given header.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| write_failed(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(|e| write_failed(path, e))?;
    }
    w.flush().map_err(|e| write_failed(path, e))
}

/// Writes sample paths; the wide layout needs a common grid.
pub fn write_paths_csv(path: &Path, data: &SamplePaths, layout: Layout) -> Result<(), CliError> {
    match layout {
        Layout::Wide => {
            let grid = data
                .common_grid()
                .ok_or_else(|| CliError::Validation("wide layout needs paths on a common grid; use --layout long".into()))?;
            let mut header = vec!["time".to_string()];
            header.extend((1..=data.n_paths()).map(|i| format!("path_{i}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = grid.iter().enumerate().map(|(j, &t)| {
                let mut row = vec![t];
                row.extend(data.values().iter().map(|v| v[j]));
                row
            });
            write_table(path, &header, rows)
        }
        Layout::Long => {
            let mut w = csv::Writer::from_writer(create(path)?);
            w.write_record(["path_id", "time", "value"]).map_err(|e| write_failed(path, e))?;
            for i in 0..data.n_paths() {
                let (ts, xs) = data.path(i);
                let id = format!("path_{}", i + 1);
                for (t, x) in ts.iter().zip(xs) {
                    w.write_record([id.as_str(), &fmt_f64(*t), &fmt_f64(*x)]).map_err(|e| write_failed(path, e))?;
                }
            }
            w.flush().map_err(|e| write_failed(path, e))
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| write_failed(path, e))?;
    w.write_all(b"\n").map_err(|e| write_failed(path, e))?;
    w.flush().map_err(|e| write_failed(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(|e| CliError::Validation(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| write_failed(path, e))?;
    w.flush().map_err(|e| write_failed(path, e))
}

//! Delimited-text and JSON readers and writers for datasets, predictions and
//! traces.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::data::{wrap_angle, Dataset, TestGroup};
use crate::error::{Error, Result};
use crate::experiment::BenchRow;
use crate::fit::SCHEMA_VERSION;
use crate::hier::DeltaPrediction;
use crate::predict::PredictionResult;
use crate::synthetic::Truth;

pub const DATA_COLUMNS: [&str; 2] = ["x", "y"];
pub const GROUP_COLUMNS: [&str; 4] = ["test_id", "distance", "frequency", "phase"];
pub const DELTA_COLUMNS: [&str; 7] = [
    "distance",
    "delta_mean",
    "delta_var",
    "exp_mean",
    "exp_var",
    "exp_lo95",
    "exp_hi95",
];
pub const BENCH_COLUMNS: [&str; 6] = ["method", "size", "rep", "rmse_circular", "crps", "error"];
pub const PREDICTION_COLUMNS: [&str; 8] = [
    "x",
    "mean_wrapped",
    "mean_unwrapped",
    "var",
    "lo95",
    "hi95",
    "k_mean",
    "k_var",
];

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            path: path_str(path),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// A delimited table read into named columns.
struct Table {
    path: String,
    index: HashMap<String, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let index: HashMap<String, usize> = headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
        for col in required {
            if !index.contains_key(*col) {
                return Err(Error::Schema {
                    path: path_str(path),
                    message: format!(
                        "missing column '{col}' (found: {})",
                        headers.iter().collect::<Vec<_>>().join(",")
                    ),
                });
            }
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, rec));
        }
        Ok(Self {
            path: path_str(path),
            index,
            rows,
        })
    }

    fn str_at<'a>(&self, row: &'a (u64, csv::StringRecord), col: &str) -> &'a str {
        row.1.get(self.index[col]).unwrap_or("")
    }

    fn f64_at(&self, row: &(u64, csv::StringRecord), col: &str) -> Result<f64> {
        let s = self.str_at(row, col);
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Parse {
                path: self.path.clone(),
                line: row.0,
                message: format!("column '{col}': '{s}' is not a finite number"),
            }),
        }
    }

    fn column(&self, col: &str) -> Result<Vec<f64>> {
        self.rows.iter().map(|r| self.f64_at(r, col)).collect()
    }
}

/// Options applied to angular columns on ingestion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AngleOptions {
    /// Values are in degrees rather than radians.
    pub degrees: bool,
    /// Reflect responses, `y -> -y mod 2pi`.
    pub negate: bool,
}

impl AngleOptions {
    fn convert(&self, table: &Table, row: &(u64, csv::StringRecord), col: &str) -> Result<f64> {
        let mut v = table.f64_at(row, col)?;
        if self.degrees {
            v = wrap_angle(v.to_radians());
        }
        if self.negate {
            v = wrap_angle(-v);
        }
        if !(0.0..std::f64::consts::TAU).contains(&v) {
            return Err(Error::Parse {
                path: table.path.clone(),
                line: row.0,
                message: format!(
                    "column '{col}': angle {v} is outside [0, 2pi); pass degrees if the data are in degrees"
                ),
            });
        }
        Ok(v)
    }
}

pub fn read_dataset(path: &Path, angles: AngleOptions) -> Result<Dataset> {
    let table = Table::read(path, &DATA_COLUMNS)?;
    let x = table.column("x")?;
    let y = table
        .rows
        .iter()
        .map(|r| angles.convert(&table, r, "y"))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(x, y)
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(DATA_COLUMNS).map_err(|e| csv_error(path, e))?;
    for (x, y) in data.x().iter().zip(data.y()) {
        w.write_record([fmt(*x), fmt(*y)]).map_err(|e| csv_error(path, e))?;
    }
    finish(w)
}

pub fn write_truth(path: &Path, data: &Dataset, truth: &Truth) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "z", "k", "noise"])
        .map_err(|e| csv_error(path, e))?;
    for i in 0..data.len() {
        w.write_record([
            fmt(data.x()[i]),
            fmt(truth.z[i]),
            truth.k[i].to_string(),
            fmt(truth.noise[i]),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(w)
}

/// Reads grouped data; tests keep the order of their first row.
pub fn read_groups(path: &Path, angles: AngleOptions) -> Result<Vec<TestGroup>> {
    let table = Table::read(path, &GROUP_COLUMNS)?;
    let mut groups: Vec<TestGroup> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for row in &table.rows {
        let id = table.str_at(row, "test_id").to_string();
        let distance = table.f64_at(row, "distance")?;
        let f = table.f64_at(row, "frequency")?;
        let p = angles.convert(&table, row, "phase")?;
        let g = *by_id.entry(id.clone()).or_insert_with(|| {
            groups.push(TestGroup {
                test_id: id.clone(),
                distance,
                frequency: Vec::new(),
                phase: Vec::new(),
            });
            groups.len() - 1
        });
        if groups[g].distance != distance {
            return Err(Error::Parse {
                path: table.path.clone(),
                line: row.0,
                message: format!("column 'distance': test '{id}' has more than one distance"),
            });
        }
        groups[g].frequency.push(f);
        groups[g].phase.push(p);
    }
    Ok(groups)
}

pub fn write_groups(path: &Path, groups: &[TestGroup]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(GROUP_COLUMNS).map_err(|e| csv_error(path, e))?;
    for g in groups {
        for (f, p) in g.frequency.iter().zip(&g.phase) {
            w.write_record([g.test_id.clone(), fmt(g.distance), fmt(*f), fmt(*p)])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(w)
}

pub fn write_prediction(path: &Path, p: &PredictionResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(PREDICTION_COLUMNS).map_err(|e| csv_error(path, e))?;
    for j in 0..p.len() {
        w.write_record([
            fmt(p.x[j]),
            fmt(p.mean_wrapped[j]),
            fmt(p.mean_unwrapped[j]),
            fmt(p.var[j]),
            fmt(p.lo95[j]),
            fmt(p.hi95[j]),
            fmt(p.k_mean[j]),
            fmt(p.k_var[j]),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(w)
}

pub fn write_delta_prediction(path: &Path, p: &DeltaPrediction) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(DELTA_COLUMNS).map_err(|e| csv_error(path, e))?;
    for j in 0..p.distance.len() {
        w.write_record([
            fmt(p.distance[j]),
            fmt(p.delta_mean[j]),
            fmt(p.delta_var[j]),
            fmt(p.exp_mean[j]),
            fmt(p.exp_var[j]),
            fmt(p.exp_lo95[j]),
            fmt(p.exp_hi95[j]),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(w)
}

/// Long-format benchmark table. Failed cells leave the scores empty and carry
/// the error message.
pub fn write_bench_rows(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(BENCH_COLUMNS).map_err(|e| csv_error(path, e))?;
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.size.to_string(),
            r.rep.to_string(),
            opt(r.rmse_circular),
            opt(r.crps),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(w)
}

/// Prediction summaries as read back from a file.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionTable {
    pub x: Vec<f64>,
    pub mean_wrapped: Vec<f64>,
    pub var: Vec<f64>,
}

pub fn read_prediction(path: &Path) -> Result<PredictionTable> {
    let table = Table::read(path, &["x", "mean_wrapped", "var"])?;
    Ok(PredictionTable {
        x: table.column("x")?,
        mean_wrapped: table.column("mean_wrapped")?,
        var: table.column("var")?,
    })
}

/// Wide table of retained predictive draws: `x, s0, s1, ...`.
pub fn write_samples(path: &Path, p: &PredictionResult) -> Result<()> {
    let mut w = writer(path)?;
    let t = p.samples.first().map_or(0, Vec::len);
    let mut header = vec!["x".to_string()];
    header.extend((0..t).map(|i| format!("s{i}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (x, s) in p.x.iter().zip(&p.samples) {
        let mut rec = vec![fmt(*x)];
        rec.extend(s.iter().map(|v| fmt(*v)));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    finish(w)
}

pub fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let table = Table::read(path, &["x"])?;
    let mut cols: Vec<(usize, String)> = table
        .index
        .keys()
        .filter_map(|name| {
            name.strip_prefix('s')
                .and_then(|n| n.parse::<usize>().ok())
                .map(|i| (i, name.clone()))
        })
        .collect();
    cols.sort();
    if cols.len() < 2 {
        return Err(Error::Schema {
            path: table.path.clone(),
            message: "need at least two sample columns 's0', 's1', ...".into(),
        });
    }
    let x = table.column("x")?;
    let samples = table
        .rows
        .iter()
        .map(|r| cols.iter().map(|(_, c)| table.f64_at(r, c)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok((x, samples))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads a JSON document whose schema version sits at `version_pointer`,
/// rejecting other versions before deserializing.
pub fn read_versioned<T: DeserializeOwned>(path: &Path, version_pointer: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path_str(path),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    match value.pointer(version_pointer).and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::Schema {
                path: path_str(path),
                message: format!("schema version {v} is not supported (expected {SCHEMA_VERSION})"),
            })
        }
        None => {
            return Err(Error::Schema {
                path: path_str(path),
                message: format!(
                    "missing '{}' field",
                    version_pointer.trim_start_matches('/').replace('/', ".")
                ),
            })
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Schema {
        path: path_str(path),
        message: e.to_string(),
    })
}

pub fn read_trace(path: &Path) -> Result<crate::fit::Trace> {
    read_versioned(path, "/meta/schema_version")
}

pub fn read_hier_trace(path: &Path) -> Result<crate::hier::HierTrace> {
    read_versioned(path, "/schema_version")
}

//! Dataset CSV and JSON sidecar files.
//!
//! CSV columns: `unit_id, interval_index, op_cond_1..p, sensor_1..d_k, rul`,
//! one row per inspection interval, header required. `rul` is the uncapped
//! number of intervals left until failure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::RunToFailureSeries;
use crate::error::{Error, Result};

pub fn write_dataset_csv(path: impl AsRef<Path>, series: &[RunToFailureSeries]) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut w = csv::Writer::from_writer(file);
    let (p, d) = series
        .first()
        .map_or((0, 0), |s| (s.op_conditions.len(), s.sensor_count()));
    let mut header = vec!["unit_id".to_string(), "interval_index".to_string()];
    header.extend((1..=p).map(|i| format!("op_cond_{i}")));
    header.extend((1..=d).map(|i| format!("sensor_{i}")));
    header.push("rul".into());
    w.write_record(&header)?;
    for s in series {
        if s.op_conditions.len() != p || s.sensor_count() != d {
            return Err(Error::Format(format!(
                "unit {} does not match the column layout",
                s.unit_id
            )));
        }
        for (t, row) in s.sensors.iter().enumerate() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(s.unit_id.to_string());
            rec.push(t.to_string());
            rec.extend(s.op_conditions.iter().map(f64::to_string));
            rec.extend(row.iter().map(f64::to_string));
            rec.push(s.remaining_at(t).to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV back into per-unit series, in order of first appearance.
pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<Vec<RunToFailureSeries>> {
    read_series(path.as_ref(), true)
}

/// Like [`read_dataset_csv`] but the `rul` column may be absent, as for
/// windows awaiting a prediction. Without it each series is treated as
/// ending at its last row, so labels derived from the result are meaningless.
pub fn read_window_csv(path: impl AsRef<Path>) -> Result<Vec<RunToFailureSeries>> {
    read_series(path.as_ref(), false)
}

fn read_series(path: &Path, require_rul: bool) -> Result<Vec<RunToFailureSeries>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let unit_col = col("unit_id").ok_or_else(|| Error::Format("missing unit_id column".into()))?;
    let t_col = col("interval_index")
        .ok_or_else(|| Error::Format("missing interval_index column".into()))?;
    let rul_col = col("rul");
    if require_rul && rul_col.is_none() {
        return Err(Error::Format("missing rul column".into()));
    }
    let op_cols: Vec<usize> = (1..).map_while(|i| col(&format!("op_cond_{i}"))).collect();
    let sensor_cols: Vec<usize> = (1..).map_while(|i| col(&format!("sensor_{i}"))).collect();
    if sensor_cols.is_empty() {
        return Err(Error::Format("no sensor_N columns".into()));
    }

    let mut out: Vec<RunToFailureSeries> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| -> Result<&str> {
            rec.get(c)
                .ok_or_else(|| Error::Format(format!("row {}: missing column {c}", line + 2)))
        };
        let parse_f = |c: usize| -> Result<f64> {
            field(c)?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: {e}", line + 2)))
        };
        let parse_u = |c: usize| -> Result<usize> {
            field(c)?
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("row {}: {e}", line + 2)))
        };
        let unit_id = parse_u(unit_col)? as u32;
        let t = parse_u(t_col)?;
        let rul = rul_col.map(parse_u).transpose()?;
        let sensors = sensor_cols
            .iter()
            .map(|&c| parse_f(c))
            .collect::<Result<Vec<_>>>()?;
        let ops = op_cols
            .iter()
            .map(|&c| parse_f(c))
            .collect::<Result<Vec<_>>>()?;

        let is_new = out.last().is_none_or(|s| s.unit_id != unit_id);
        if is_new {
            if out.iter().any(|s| s.unit_id == unit_id) {
                return Err(Error::Format(format!(
                    "rows of unit {unit_id} are not contiguous"
                )));
            }
            out.push(RunToFailureSeries {
                unit_id,
                op_conditions: ops,
                sensors: Vec::new(),
                failure_index: t + rul.unwrap_or(0),
            });
        }
        let s = out.last_mut().expect("just pushed");
        if t != s.len() {
            return Err(Error::Format(format!(
                "unit {unit_id}: expected interval {}, found {t}",
                s.len()
            )));
        }
        if rul.is_some_and(|r| t + r != s.failure_index) {
            return Err(Error::Format(format!(
                "unit {unit_id}: rul column inconsistent at interval {t}"
            )));
        }
        s.sensors.push(sensors);
        if rul.is_none() {
            s.failure_index = t;
        }
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

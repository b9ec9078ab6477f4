//! Curve file formats.
//!
//! * CSV with header `curve_id,t,y`, one row per observation. Rows of a curve
//!   need not be contiguous or sorted; curves keep the order in which their
//!   id first appears.
//! * JSON array `[{"id": ..., "t": [...], "y": [...]}]`.
//!
//! Floats are written with the shortest representation that parses back to
//! the same `f64`.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{Curve, CurveError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

const CSV_HEADER: [&str; 3] = ["curve_id", "t", "y"];

/// Reads curves from `curve_id,t,y` CSV.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<Curve>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(IoError::Format {
            line: 1,
            message: format!("expected header `curve_id,t,y`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut order: Vec<String> = Vec::new();
    let mut data: HashMap<String, (Vec<f64>, Vec<f64>)> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(IoError::Format { line, message: format!("expected 3 fields, found {}", record.len()) });
        }
        let parse = |field: &str, name: &str| -> Result<f64, IoError> {
            field.parse::<f64>().map_err(|_| IoError::Format {
                line,
                message: format!("cannot parse {name} value `{field}`"),
            })
        };
        let id = record[0].to_string();
        let t = parse(&record[1], "t")?;
        let y = parse(&record[2], "y")?;
        let entry = data.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            (Vec::new(), Vec::new())
        });
        entry.0.push(t);
        entry.1.push(y);
    }
    order
        .into_iter()
        .map(|id| {
            let (t, y) = data.remove(&id).expect("id recorded on insert");
            Curve::from_unsorted(id, t, y).map_err(IoError::from)
        })
        .collect()
}

/// Writes curves as `curve_id,t,y` CSV.
pub fn write_csv<W: Write>(writer: W, curves: &[Curve]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for c in curves {
        for (t, y) in c.times().iter().zip(c.values()) {
            wtr.write_record([c.id(), &t.to_string(), &y.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonCurve {
    id: String,
    t: Vec<f64>,
    y: Vec<f64>,
}

pub fn read_json<R: Read>(reader: R) -> Result<Vec<Curve>, IoError> {
    let raw: Vec<JsonCurve> = serde_json::from_reader(reader)?;
    raw.into_iter()
        .map(|c| Curve::from_unsorted(c.id, c.t, c.y).map_err(IoError::from))
        .collect()
}

pub fn write_json<W: Write>(writer: W, curves: &[Curve]) -> Result<(), IoError> {
    let raw: Vec<JsonCurve> = curves
        .iter()
        .map(|c| JsonCurve { id: c.id().to_string(), t: c.times().to_vec(), y: c.values().to_vec() })
        .collect();
    serde_json::to_writer(writer, &raw)?;
    Ok(())
}

/// Reads curves choosing the format from the file extension (`.json` or CSV).
pub fn read_curves_path(path: &std::path::Path) -> Result<Vec<Curve>, IoError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_json(file),
        _ => read_csv(file),
    }
}

pub fn write_curves_path(path: &std::path::Path, curves: &[Curve]) -> Result<(), IoError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => write_json(file, curves),
        _ => write_csv(file, curves),
    }
}

//! CSV and JSON artifacts.
//!
//! `field.csv`: header `t,<x_0>,…,<x_{N-1}>` carrying the node coordinates,
//! then one row per time level. `front.csv`: header `t,front`, then per level
//! the time followed by every zero crossing bounding the positive phase (rows
//! have varying length; a level without positive phase has only `t`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::regularize::FieldSamples;
use crate::solver::SpaceTimeField;

fn fmt(v: f64) -> String {
    // shortest representation that parses back to the same bits
    format!("{v:?}")
}

pub fn write_field_csv(path: &Path, field: &FieldSamples) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(field.x.iter().map(|&x| fmt(x)));
    w.write_record(&header)?;
    for (t, row) in field.times.iter().zip(&field.values) {
        let mut rec = vec![fmt(*t)];
        rec.extend(row.iter().map(|&v| fmt(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<FieldSamples> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let parse = |s: &str, what: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::domain(format!("{}: bad {what} `{s}`", path.display())))
    };
    let header = r.headers()?.clone();
    if header.get(0).map(str::trim) != Some("t") || header.len() < 2 {
        return Err(Error::domain(format!(
            "{}: header must be t,<x_0>,…",
            path.display()
        )));
    }
    let x = header
        .iter()
        .skip(1)
        .map(|s| parse(s, "coordinate"))
        .collect::<Result<Vec<_>>>()?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut it = rec.iter();
        times.push(parse(it.next().unwrap_or(""), "time")?);
        values.push(it.map(|s| parse(s, "value")).collect::<Result<Vec<_>>>()?);
    }
    FieldSamples::new("x", x, times, values)
}

pub fn write_front_csv(path: &Path, field: &SpaceTimeField) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    w.write_record(["t", "front"])?;
    for (t, front) in field.times.iter().zip(&field.front) {
        let mut rec = vec![fmt(*t)];
        rec.extend(front.iter().map(|&x| fmt(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub nodes: usize,
    pub levels: usize,
    pub extinction_time: Option<f64>,
    pub extinction_estimate: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iters_total: usize,
    pub newton_iters_max: usize,
    pub min_dt: f64,
    pub max_principle_margin: f64,
}

impl From<&SpaceTimeField> for RunSummary {
    fn from(f: &SpaceTimeField) -> Self {
        RunSummary {
            nodes: f.x.len(),
            levels: f.times.len(),
            extinction_time: f.extinction_time,
            extinction_estimate: f.extinction_estimate,
            accepted_steps: f.stats.accepted_steps,
            rejected_steps: f.stats.rejected_steps,
            newton_iters_total: f.stats.newton_iters_total,
            newton_iters_max: f.stats.newton_iters_max,
            min_dt: f.stats.min_dt,
            max_principle_margin: f.stats.max_principle_margin,
        }
    }
}

/// `field.csv`, `front.csv` and `summary.json` in `dir`.
pub fn write_run(dir: &Path, field: &SpaceTimeField) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_field_csv(&dir.join("field.csv"), &FieldSamples::from(field))?;
    write_front_csv(&dir.join("front.csv"), field)?;
    write_json(&dir.join("summary.json"), &RunSummary::from(field))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let f = FieldSamples::new(
            "x",
            vec![-1.0, 0.1 + 0.2, 1.0],
            vec![0.0, 1.0 / 3.0],
            vec![
                vec![1e-300, -0.0, 2.5],
                vec![f64::MIN_POSITIVE, 7.0, -1.0 / 7.0],
            ],
        )
        .unwrap();
        write_field_csv(&p, &f).unwrap();
        let g = read_field_csv(&p).unwrap();
        assert_eq!(f.x, g.x);
        assert_eq!(f.times, g.times);
        for (a, b) in f.values.iter().flatten().zip(g.values.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(
            text.starts_with("t,-1.0,0.30000000000000004,1.0\n"),
            "{text}"
        );
    }

    #[test]
    fn malformed_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        for text in [
            "x,0,1\n0,1,2\n",
            "t,0,1\n0,1\n",
            "t,0,1\n0,1,oops\n",
            "t,1,0\n0,1,2\n",
        ] {
            std::fs::write(&p, text).unwrap();
            assert!(read_field_csv(&p).is_err(), "{text}");
        }
    }
}

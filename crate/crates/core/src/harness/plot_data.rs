use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use super::{wilson_interval, SweepRow, WILSON_Z};

#[derive(Debug, Error)]
pub enum PlotDataError {
    #[error("column `{0}` not found in input header")]
    MissingColumn(String),
    #[error("row {row}: column `{column}` holds `{value}`, not a number")]
    NotANumber { row: usize, column: String, value: String },
    #[error("no data: every row lacks a value for `{0}`")]
    NoData(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One point of a plotted series, with a Wilson 95% band for rate columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub y_lo: Option<f64>,
    pub y_hi: Option<f64>,
}

/// Count column backing each rate column, for error bars.
const RATE_COUNTS: [(&str, &str); 2] = [("sat_rate", "sat_count"), ("success_rate", "success_count")];

/// Reshapes a CSV with a header into series of `(x, y)` points grouped by
/// the `group` columns. Columns are looked up by name. Rows with an empty
/// `y` are skipped. Series appear in first-seen order, points by ascending `x`.
pub fn plot_data<R: Read>(input: R, x: &str, y: &str, group: &[String]) -> Result<Vec<PlotPoint>, PlotDataError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| PlotDataError::MissingColumn(name.to_string()));
    let (xi, yi) = (col(x)?, col(y)?);
    let gi: Vec<usize> = group.iter().map(|g| col(g)).collect::<Result<_, _>>()?;
    let band = match RATE_COUNTS.iter().find(|(rate, _)| *rate == y) {
        Some((_, count)) => match (col(count), col("trials")) {
            (Ok(c), Ok(t)) => Some((c, t)),
            _ => None,
        },
        None => None,
    };

    let mut series: Vec<(String, Vec<PlotPoint>)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let num = |idx: usize| -> Result<Option<f64>, PlotDataError> {
            let raw = record.get(idx).unwrap_or("").trim();
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse::<f64>().map(Some).map_err(|_| PlotDataError::NotANumber {
                row,
                column: header[idx].to_string(),
                value: raw.to_string(),
            })
        };
        let (Some(xv), Some(yv)) = (num(xi)?, num(yi)?) else { continue };
        let (y_lo, y_hi) = match band {
            Some((c, t)) => match (num(c)?, num(t)?) {
                (Some(c), Some(t)) if t >= 1.0 => {
                    let (lo, hi) = wilson_interval(c as usize, t as usize, WILSON_Z);
                    (Some(lo), Some(hi))
                }
                _ => (None, None),
            },
            None => (None, None),
        };
        let label = if gi.is_empty() {
            "all".to_string()
        } else {
            group.iter().zip(&gi).map(|(g, &idx)| format!("{g}={}", record.get(idx).unwrap_or(""))).collect::<Vec<_>>().join(",")
        };
        let point = PlotPoint { series: label.clone(), x: xv, y: yv, y_lo, y_hi };
        match series.iter_mut().find(|(s, _)| *s == label) {
            Some((_, pts)) => pts.push(point),
            None => series.push((label, vec![point])),
        }
    }
    if series.is_empty() {
        return Err(PlotDataError::NoData(y.to_string()));
    }
    let mut out = Vec::new();
    for (_, mut pts) in series {
        pts.sort_by(|a, b| a.x.total_cmp(&b.x));
        out.extend(pts);
    }
    Ok(out)
}

pub fn write_plot_csv<W: Write>(points: &[PlotPoint], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if points.is_empty() {
        w.write_record(["series", "x", "y", "y_lo", "y_hi"])?;
    }
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a sweep CSV by header name.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

//! File formats.
//!
//! * Time series: CSV with header `k,y`, one row per sample, `k` counting from 0.
//! * Series metadata sidecar: JSON `{"tau0": ..., "model": {...}, "seed": ...}`,
//!   stored next to the CSV as `<stem>.meta.json`.
//! * Variance curves: CSV with header `tau,t,value,time_dependent,stationary`,
//!   plus a trailing `blocks` column for empirical curves, in which the two
//!   decomposition columns are left empty. JSON uses the same field names.
//! * Coefficient table: CSV `N,m,exact_numerator,exact_denominator,float_value`
//!   with the float printed to five significant figures.
//!
//! Floats in CSV use the shortest representation that round-trips.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analytic::{CurveKind, VarianceCurve};
use crate::coeffs::TableEntry;
use crate::error::{Error, Result};
use crate::model::ClockModel;
use crate::simulate::{SeriesMeta, TimeSeries};

/// `x` in scientific notation with `digits` decimals and a signed two-digit
/// exponent, e.g. `6.3080e-06`.
pub fn format_sci(x: f64, digits: usize) -> String {
    let raw = format!("{x:.digits$e}");
    let (mantissa, exponent) = raw.split_once('e').expect("exponent form");
    let exp: i32 = exponent.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_series_csv<W: Write>(out: W, series: &TimeSeries) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "k,y")?;
    for (k, y) in series.samples().iter().enumerate() {
        writeln!(out, "{k},{}", fmt_float(*y))?;
    }
    out.flush()?;
    Ok(())
}

/// Parse a `k,y` CSV; `k` must run `0, 1, 2, ...` without gaps.
pub fn read_series_csv<R: Read>(input: R, tau0: f64) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "k" || &headers[1] != "y" {
        return Err(Error::Format(format!(
            "expected header `k,y`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut samples = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let k: usize = record[0]
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bad index `{}`", row + 1, &record[0])))?;
        if k != row {
            return Err(Error::Format(format!("row {}: expected k = {row}, found {k}", row + 1)));
        }
        let y: f64 = record[1]
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bad value `{}`", row + 1, &record[1])))?;
        samples.push(y);
    }
    TimeSeries::new(tau0, samples)
}

/// `<dir>/<stem>.meta.json` for a series at `<dir>/<stem>.csv`.
pub fn sidecar_path(series_path: &Path) -> PathBuf {
    let stem = series_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    series_path.with_file_name(format!("{stem}.meta.json"))
}

pub fn write_json<W: Write, T: Serialize>(out: W, value: &T) -> Result<()> {
    let mut out = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Write `series` as CSV plus its metadata sidecar.
pub fn save_series(path: &Path, series: &TimeSeries) -> Result<()> {
    write_series_csv(File::create(path)?, series)?;
    if let Some(meta) = &series.meta {
        write_json(File::create(sidecar_path(path))?, meta)?;
    }
    Ok(())
}

/// Load a series CSV. `tau0` comes from the sidecar when present, else from
/// `default_tau0`; if both are given they must agree.
pub fn load_series(path: &Path, default_tau0: Option<f64>) -> Result<TimeSeries> {
    let side = sidecar_path(path);
    let meta: Option<SeriesMeta> = if side.exists() {
        Some(serde_json::from_reader(BufReader::new(File::open(&side)?))?)
    } else {
        None
    };
    let tau0 = match (&meta, default_tau0) {
        (Some(m), Some(t)) if m.tau0 != t => {
            return Err(Error::invalid(format!(
                "tau0 {t} disagrees with {} in {}",
                m.tau0,
                side.display()
            )))
        }
        (Some(m), _) => m.tau0,
        (None, Some(t)) => t,
        (None, None) => 1.0,
    };
    let series = read_series_csv(BufReader::new(File::open(path)?), tau0)?;
    Ok(match meta {
        Some(m) => series.with_meta(m),
        None => series,
    })
}

pub fn parse_model(text: &str) -> Result<ClockModel> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_model(path: &Path) -> Result<ClockModel> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_model(&text)
}

pub fn write_curve_csv<W: Write>(out: W, curve: &VarianceCurve) -> Result<()> {
    let mut out = BufWriter::new(out);
    let empirical = curve.kind == CurveKind::Empirical;
    write!(out, "tau,t,value,time_dependent,stationary")?;
    if empirical {
        write!(out, ",blocks")?;
    }
    writeln!(out)?;
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    for p in &curve.points {
        write!(
            out,
            "{},{},{},{},{}",
            fmt_float(p.tau),
            fmt_float(p.t),
            fmt_float(p.value),
            opt(p.time_dependent_part),
            opt(p.stationary_part)
        )?;
        if empirical {
            write!(out, ",{}", p.blocks.map(|b| b.to_string()).unwrap_or_default())?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_table_csv<W: Write>(out: W, entries: &[TableEntry]) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "N,m,exact_numerator,exact_denominator,float_value")?;
    for e in entries {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.order,
            e.index,
            e.ratio.numer(),
            e.ratio.denom(),
            format_sci(e.value(), 4)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// JSON row of the coefficient table; `log10_value` gives the log-magnitude
/// view used for plotting coefficient decay against `N`.
#[derive(Debug, Clone, Serialize)]
pub struct TableRecord {
    #[serde(rename = "N")]
    pub order: usize,
    pub m: usize,
    pub exact_numerator: String,
    pub exact_denominator: String,
    pub float_value: String,
    pub log10_value: f64,
}

pub fn table_records(entries: &[TableEntry]) -> Vec<TableRecord> {
    entries
        .iter()
        .map(|e| TableRecord {
            order: e.order,
            m: e.index,
            exact_numerator: e.ratio.numer().to_string(),
            exact_denominator: e.ratio.denom().to_string(),
            float_value: format_sci(e.value(), 4),
            log10_value: e.value().log10(),
        })
        .collect()
}

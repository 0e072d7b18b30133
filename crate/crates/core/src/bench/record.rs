//! Result rows and their CSV / dat serialization.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] =
    ["method", "N", "nu", "param", "compression_rate", "spectral_error", "iterations", "assembly_ms", "solve_ms"];

/// One benchmark row. Metrics are `None` for failed sweep points or when the
/// study does not measure them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub method: String,
    pub n: usize,
    pub nu: f64,
    /// κ or threshold.
    pub param: f64,
    pub compression_rate: Option<f64>,
    pub spectral_error: Option<f64>,
    pub iterations: Option<usize>,
    pub assembly_ms: f64,
    pub factorization_ms: f64,
    pub solve_ms: f64,
    pub mean_footprint: Option<f64>,
    pub converged: Option<bool>,
    pub failure: Option<String>,
}

impl ExperimentRecord {
    pub fn new(method: impl Into<String>, n: usize, nu: f64, param: f64) -> Self {
        Self {
            method: method.into(),
            n,
            nu,
            param,
            compression_rate: None,
            spectral_error: None,
            iterations: None,
            assembly_ms: 0.0,
            factorization_ms: 0.0,
            solve_ms: 0.0,
            mean_footprint: None,
            converged: None,
            failure: None,
        }
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    method: String,
    #[serde(rename = "N")]
    n: usize,
    nu: f64,
    param: f64,
    compression_rate: Option<f64>,
    spectral_error: Option<f64>,
    iterations: Option<usize>,
    assembly_ms: f64,
    solve_ms: f64,
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse { line, message: format!("{kind:?}") },
    }
}

pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for r in records {
        w.serialize(CsvRow {
            method: r.method.clone(),
            n: r.n,
            nu: r.nu,
            param: r.param,
            compression_rate: r.compression_rate,
            spectral_error: r.spectral_error,
            iterations: r.iterations,
            assembly_ms: r.assembly_ms,
            solve_ms: r.solve_ms,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_records_csv`]. Columns outside the CSV
/// (factorization time, footprint size, status) come back empty.
pub fn parse_records_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(csv_error)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse { line: 1, message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")) });
    }
    reader
        .deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(csv_error)?;
            let mut r = ExperimentRecord::new(row.method, row.n, row.nu, row.param);
            r.compression_rate = row.compression_rate;
            r.spectral_error = row.spectral_error;
            r.iterations = row.iterations;
            r.assembly_ms = row.assembly_ms;
            r.solve_ms = row.solve_ms;
            Ok(r)
        })
        .collect()
}

/// Whitespace-separated table for gnuplot / pgfplots; missing values are `nan`.
pub fn write_records_dat<W: Write>(records: &[ExperimentRecord], mut out: W) -> Result<()> {
    writeln!(
        out,
        "# method N nu param compression_rate spectral_error iterations assembly_ms factorization_ms solve_ms mean_footprint status"
    )?;
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:e}"));
    for r in records {
        let status = match (&r.failure, r.converged) {
            (Some(_), _) => "failed",
            (None, Some(false)) => "unconverged",
            _ => "ok",
        };
        writeln!(
            out,
            "{} {} {} {} {} {} {} {:.3} {:.3} {:.3} {} {}",
            r.method,
            r.n,
            r.nu,
            r.param,
            opt(r.compression_rate),
            opt(r.spectral_error),
            r.iterations.map_or_else(|| "nan".to_string(), |i| i.to_string()),
            r.assembly_ms,
            r.factorization_ms,
            r.solve_ms,
            opt(r.mean_footprint),
            status,
        )?;
    }
    Ok(())
}

/// Writes the CSV file; IO errors (e.g. a missing directory) are returned as is.
pub fn emit(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_records_csv(records, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn emit_dat(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_records_dat(records, &mut out)?;
    out.flush()?;
    Ok(())
}

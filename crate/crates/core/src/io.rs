//! File helpers shared by the command-line front end and tests.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;
use crate::filter::FilterExpr;
use crate::lp::CouplingProfile;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Reads and validates a filter expression.
pub fn read_expr(path: &Path) -> Result<FilterExpr> {
    let e: FilterExpr = read_json(path)?;
    e.validate()?;
    Ok(e)
}

pub fn read_profile(path: &Path) -> Result<CouplingProfile> {
    let p: CouplingProfile = read_json(path)?;
    p.validate()?;
    Ok(p)
}

/// Writes `(step count, measured error, bound)` rows with the given first-column name.
pub fn write_convergence_csv<W: Write>(w: W, step_column: &str, rows: &[(usize, f64, f64)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([step_column, "measured_error", "bound"])?;
    for (r, e, b) in rows {
        out.write_record([r.to_string(), e.to_string(), b.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

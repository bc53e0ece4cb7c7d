//! CSV output with pinned schema, ordering, and number formatting.
//!
//! Reals are printed in scientific notation with 9 significant digits, which
//! round-trips the values at that precision and keeps byte-identical output
//! across runs. Row files and aggregate files share the axis column name.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::sweep::{AggregateRow, ResultRow, SweepAxis};

/// 9 significant digits, scientific.
pub fn format_real(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn rows_header(axis: SweepAxis) -> String {
    format!(
        "{},realization,user,scheme,status,r_ul,r_dl,r_e2e",
        axis.column_name()
    )
}

pub fn aggregate_header(axis: SweepAxis) -> String {
    format!("{},scheme,mean_sum_rate,stderr", axis.column_name())
}

pub fn write_rows(out: &mut impl Write, axis: SweepAxis, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(out, "{}", rows_header(axis))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_real(r.axis_value),
            r.realization,
            r.user,
            r.scheme.as_str(),
            r.status.as_str(),
            format_real(r.r_ul),
            format_real(r.r_dl),
            format_real(r.r_e2e),
        )?;
    }
    Ok(())
}

pub fn write_aggregate(
    out: &mut impl Write,
    axis: SweepAxis,
    rows: &[AggregateRow],
) -> std::io::Result<()> {
    writeln!(out, "{}", aggregate_header(axis))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            format_real(r.axis_value),
            r.scheme.as_str(),
            format_real(r.mean_sum_rate),
            format_real(r.stderr),
        )?;
    }
    Ok(())
}

pub fn write_rows_file(path: &Path, axis: SweepAxis, rows: &[ResultRow]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_rows(&mut out, axis, rows)?;
    out.flush()
}

pub fn write_aggregate_file(
    path: &Path,
    axis: SweepAxis,
    rows: &[AggregateRow],
) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_aggregate(&mut out, axis, rows)?;
    out.flush()
}

//! CSV schemas and number formatting.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sgda_core::optimizer::TrajectoryRow;
use sgda_core::Mat;

use crate::error::{HarnessError, Result};

pub const TRAJECTORY_HEADER: &str = "trial_id,iter,g_emp,rec_err,grad_norm,wall_ms";
pub const SUMMARY_HEADER: &str = "d,n,trials,mean_rec_err,std_rec_err,mean_wall_ms";
pub const FAILURES_HEADER: &str = "d,n,trial_id,message";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv(trial_id: usize, rows: &[TrajectoryRow]) -> String {
    let mut s = String::with_capacity(96 * (rows.len() + 1));
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{trial_id},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.g_emp),
            fmt_f64(r.rec_err),
            fmt_f64(r.grad_norm),
            r.wall_ms
        );
    }
    s
}

/// One aggregated `(d, n)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub d: usize,
    pub n: usize,
    pub trials: usize,
    pub mean_rec_err: f64,
    pub std_rec_err: f64,
    pub mean_wall_ms: f64,
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.d,
            r.n,
            r.trials,
            fmt_f64(r.mean_rec_err),
            fmt_f64(r.std_rec_err),
            fmt_f64(r.mean_wall_ms)
        );
    }
    s
}

fn schema_err(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::Schema { path: path.to_path_buf(), message: message.into() }
}

/// Splits a CSV with the given header into rows of fields.
fn read_table(path: &Path, text: &str, header: &str) -> Result<Vec<Vec<String>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        Some(h) => return Err(schema_err(path, format!("expected header `{header}`, found `{h}`"))),
        None => return Err(schema_err(path, "empty file")),
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let fields: Vec<String> = l.split(',').map(|f| f.trim().to_string()).collect();
            if fields.len() != width {
                return Err(schema_err(path, format!("row {}: expected {width} fields, found {}", i + 2, fields.len())));
            }
            Ok(fields)
        })
        .collect()
}

fn field<T: std::str::FromStr>(path: &Path, row: usize, name: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| schema_err(path, format!("row {}: bad {name} `{v}`", row + 2)))
}

pub fn parse_summary(path: &Path, text: &str) -> Result<Vec<SummaryRow>> {
    read_table(path, text, SUMMARY_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let row = SummaryRow {
                d: field(path, i, "d", &f[0])?,
                n: field(path, i, "n", &f[1])?,
                trials: field(path, i, "trials", &f[2])?,
                mean_rec_err: field(path, i, "mean_rec_err", &f[3])?,
                std_rec_err: field(path, i, "std_rec_err", &f[4])?,
                mean_wall_ms: field(path, i, "mean_wall_ms", &f[5])?,
            };
            if !(row.std_rec_err >= 0.0) || !row.mean_rec_err.is_finite() {
                return Err(schema_err(path, format!("row {}: invalid statistics", i + 2)));
            }
            Ok(row)
        })
        .collect()
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_summary(path, &text)
}

/// `(trial_id, row)` pairs of a trajectory CSV.
pub fn parse_trajectory(path: &Path, text: &str) -> Result<Vec<(usize, TrajectoryRow)>> {
    read_table(path, text, TRAJECTORY_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, f)| {
            Ok((
                field(path, i, "trial_id", &f[0])?,
                TrajectoryRow {
                    iter: field(path, i, "iter", &f[1])?,
                    g_emp: field(path, i, "g_emp", &f[2])?,
                    rec_err: field(path, i, "rec_err", &f[3])?,
                    grad_norm: field(path, i, "grad_norm", &f[4])?,
                    wall_ms: field(path, i, "wall_ms", &f[5])?,
                },
            ))
        })
        .collect()
}

pub fn read_trajectory(path: &Path) -> Result<Vec<(usize, TrajectoryRow)>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_trajectory(path, &text)
}

/// Matrix as comma-separated rows.
pub fn matrix_csv(m: &Mat) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn read_matrix(path: &Path) -> Result<Mat> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| schema_err(path, format!("line {}: bad entry `{}`", i + 1, v.trim()))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(schema_err(path, "matrix rows must be nonempty and of equal length"));
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Ok(Mat::from_rows(&refs)?)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

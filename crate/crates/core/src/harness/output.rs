//! CSV and JSON writers. Numbers use 12 significant digits in scientific form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dynamics::TrajectoryRecord;
use crate::error::Result;

pub const TIMESERIES_HEADER: &str = "t_us,P_e000,P_g100,P_g010,P_g001,N1,N2,trace_err,herm_err,min_eig";

pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn timeseries_csv(record: &TrajectoryRecord) -> String {
    let mut out = String::with_capacity(160 * (record.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for i in 0..record.len() {
        let p = record.populations[i].as_array();
        let row = [
            record.times[i],
            p[0],
            p[1],
            p[2],
            p[3],
            record.n1[i],
            record.n2[i],
            record.trace_err[i],
            record.herm_err[i],
            record.min_eig[i],
        ];
        let cells: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Header row `axis1\axis2, b0, b1, ...`; then one row per axis-1 value.
pub fn grid_csv(axis1: &str, axis2: &str, a: &[f64], b: &[f64], cells: &[Vec<f64>]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{axis1}\\{axis2}");
    for &x in b {
        let _ = write!(out, ",{}", fmt_num(x));
    }
    out.push('\n');
    for (&x, row) in a.iter().zip(cells) {
        out.push_str(&fmt_num(x));
        for &v in row {
            let _ = write!(out, ",{}", fmt_num(v));
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.5), "5.00000000000e-1");
        assert_eq!(fmt_num(-1234.5678901234), "-1.23456789012e3");
        assert_eq!(fmt_num(0.0), "0.00000000000e0");
        assert_eq!("5.00000000000e-1".parse::<f64>().unwrap(), 0.5);
    }

    #[test]
    fn grid_layout() {
        let csv = grid_csv("gamma_phi", "gamma_q", &[0.0, 1.0], &[2.0, 3.0, 4.0], &[vec![1.0; 3], vec![0.5; 3]]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("gamma_phi\\gamma_q,2.0"));
        assert_eq!(lines[1].split(',').count(), 4);
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
    }
}

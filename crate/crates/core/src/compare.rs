//! Relative phase-velocity differences between two dispersion point sets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::global_matrix::{phase_velocity, DispersionBranch};
use crate::interp::Pchip;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// MHz mm
    pub fd: f64,
    pub c_ref: f64,
    pub c_test: f64,
    /// `(c_test - c_ref) / c_ref`
    pub rel_diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub mean_abs: f64,
    pub max_abs: f64,
    pub count: usize,
}

impl ComparisonSummary {
    pub fn from_rows(rows: &[ComparisonRow]) -> Self {
        let count = rows.len();
        let sum: f64 = rows.iter().map(|r| r.rel_diff.abs()).sum();
        Self {
            mean_abs: if count > 0 { sum / count as f64 } else { 0.0 },
            max_abs: rows.iter().map(|r| r.rel_diff.abs()).fold(0.0, f64::max),
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub mode: String,
    pub rows: Vec<ComparisonRow>,
    pub summary: ComparisonSummary,
    /// `f * d` interval actually compared, MHz mm.
    pub overlap: (f64, f64),
}

impl ComparisonReport {
    /// Rows `mode,fd_mhzmm,cp_ref_mps,cp_test_mps,rel_diff`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_reports_csv(w, std::slice::from_ref(self))
    }
}

pub fn write_reports_csv<W: Write>(w: W, reports: &[ComparisonReport]) -> Result<()> {
    let err = |e: csv::Error| Error::Parse {
        source_name: "comparison csv".into(),
        location: "write".into(),
        message: e.to_string(),
    };
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["mode", "fd_mhzmm", "cp_ref_mps", "cp_test_mps", "rel_diff"])
        .map_err(err)?;
    for rep in reports {
        for r in &rep.rows {
            wtr.write_record([
                rep.mode.clone(),
                r.fd.to_string(),
                r.c_ref.to_string(),
                r.c_test.to_string(),
                r.rel_diff.to_string(),
            ])
            .map_err(err)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<comparison csv>", e))
}

/// Sorts `(fd, c)` pairs and averages repeated abscissae.
fn prepare(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64, usize)> = Vec::with_capacity(v.len());
    for (x, y) in v {
        match out.last_mut() {
            Some(last) if last.0 == x => {
                last.1 += y;
                last.2 += 1;
            }
            _ => out.push((x, y, 1)),
        }
    }
    out.into_iter().map(|(x, s, n)| (x, s / n as f64)).collect()
}

/// Compares `test` against `reference`, both as `(f * d [MHz mm], c_p [m/s])`.
/// The reference is interpolated with a monotone cubic at the test
/// abscissae inside its support; test points outside are skipped.
pub fn compare(
    reference: &[(f64, f64)],
    test: &[(f64, f64)],
    mode: &str,
) -> Result<ComparisonReport> {
    let r = prepare(reference);
    if r.is_empty() || test.is_empty() {
        return Err(Error::EmptyOverlap(mode.to_string()));
    }
    let rows: Vec<ComparisonRow> = if r.len() == 1 {
        test.iter()
            .filter(|t| t.0 == r[0].0)
            .map(|&(fd, c)| row(fd, r[0].1, c))
            .collect()
    } else {
        let p = Pchip::new(
            r.iter().map(|p| p.0).collect(),
            r.iter().map(|p| p.1).collect(),
        )?;
        test.iter()
            .filter_map(|&(fd, c)| p.eval(fd).map(|c_ref| row(fd, c_ref, c)))
            .collect()
    };
    if rows.is_empty() {
        return Err(Error::EmptyOverlap(mode.to_string()));
    }
    let lo = rows.iter().map(|r| r.fd).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.fd).fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonReport {
        mode: mode.to_string(),
        summary: ComparisonSummary::from_rows(&rows),
        rows,
        overlap: (lo, hi),
    })
}

fn row(fd: f64, c_ref: f64, c_test: f64) -> ComparisonRow {
    ComparisonRow {
        fd,
        c_ref,
        c_test,
        rel_diff: (c_test - c_ref) / c_ref,
    }
}

/// [`compare`] with an analytical branch as the reference and test points
/// given as `(f [Hz], nu [1/m])`.
pub fn compare_to_branch(
    reference: &DispersionBranch,
    test: &[(f64, f64)],
    d_mm: f64,
) -> Result<ComparisonReport> {
    let r = phase_velocity(reference, d_mm);
    let t: Vec<(f64, f64)> = test
        .iter()
        .map(|&(f, nu)| (f * d_mm * 1e-6, f / nu))
        .collect();
    compare(&r, &t, &reference.label.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_percent() {
        let r = compare(&[(0.5, 3000.0), (1.5, 3000.0)], &[(1.0, 3030.0)], "A0").unwrap();
        assert!((r.rows[0].rel_diff - 0.01).abs() < 1e-12);
        assert_eq!(r.summary.count, 1);
    }

    #[test]
    fn identical_sets() {
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| (i as f64 * 0.1, 1000.0 + (i * i) as f64))
            .collect();
        let r = compare(&pts, &pts, "S0").unwrap();
        assert!(r.rows.iter().all(|x| x.rel_diff == 0.0));
        assert_eq!(r.summary.mean_abs, 0.0);
        assert_eq!(r.summary.max_abs, 0.0);
        assert_eq!(r.overlap, (0.0, 1.9000000000000001));
    }

    #[test]
    fn no_extrapolation_and_empty_overlap() {
        let r = compare(
            &[(1.0, 1.0), (2.0, 2.0)],
            &[(0.5, 1.0), (1.5, 1.5), (2.5, 3.0)],
            "A0",
        )
        .unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(matches!(
            compare(&[(1.0, 1.0), (2.0, 2.0)], &[(3.0, 1.0)], "A0"),
            Err(Error::EmptyOverlap(m)) if m == "A0"
        ));
    }

    #[test]
    fn summary_recomputes_from_rows() {
        let r = compare(
            &[(0.0, 100.0), (1.0, 200.0), (2.0, 150.0)],
            &[(0.2, 130.0), (0.9, 190.0), (1.7, 140.0)],
            "A0",
        )
        .unwrap();
        assert_eq!(ComparisonSummary::from_rows(&r.rows), r.summary);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn swap_is_antisymmetric_to_first_order() {
        let a: Vec<(f64, f64)> = (0..30)
            .map(|i| (i as f64 * 0.05, 2000.0 + 10.0 * i as f64))
            .collect();
        let b: Vec<(f64, f64)> = a.iter().map(|&(x, y)| (x, y * 1.002)).collect();
        let ab = compare(&a, &b, "x").unwrap();
        let ba = compare(&b, &a, "x").unwrap();
        for (p, q) in ab.rows.iter().zip(&ba.rows) {
            assert!((p.rel_diff + q.rel_diff).abs() < 1e-5);
        }
    }
}

//! Outlier rejection on extracted dispersion points: wavenumber bounds from
//! the scan geometry, frequency-thickness exclusion zones, mode assignment
//! and robust fit residuals.

mod spline;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk_transform::Peak;
use crate::global_matrix::{DispersionBranch, ModeLabel};
use crate::interp::Pchip;

pub use spline::{smoothing_spline, SplineFit};

/// Bisquare tuning constant (95 % efficiency under Gaussian noise).
const BISQUARE_C: f64 = 4.685;

/// Points whose `f * d` falls in `[fd_min, fd_max]` (MHz mm) are dropped
/// for the listed modes, or for every mode when `modes` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusionZone {
    pub fd_min: f64,
    /// `None` leaves the zone open towards high frequencies.
    #[serde(default)]
    pub fd_max: Option<f64>,
    #[serde(default)]
    pub modes: Vec<ModeLabel>,
    pub reason: String,
}

impl ExclusionZone {
    pub fn contains(&self, fd: f64, mode: Option<ModeLabel>) -> bool {
        let in_band = fd >= self.fd_min && self.fd_max.is_none_or(|hi| fd <= hi);
        let scoped = self.modes.is_empty() || mode.is_some_and(|m| self.modes.contains(&m));
        in_band && scoped
    }
}

fn default_zones() -> Vec<ExclusionZone> {
    vec![
        ExclusionZone {
            fd_min: 1.1,
            fd_max: Some(1.2),
            modes: vec![ModeLabel::S0],
            reason: "sh_interference".into(),
        },
        ExclusionZone {
            fd_min: 1.8,
            fd_max: None,
            modes: Vec::new(),
            reason: "convergence".into(),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Scan path length L, m.
    pub path_length: f64,
    /// Smallest spacing between scan positions, m.
    pub min_spacing: f64,
    /// Laminate thickness, mm, for `f * d`.
    pub thickness_mm: f64,
    /// The path must hold this many of the longest wavelengths.
    pub lambda_factor: f64,
    /// Spatial sampling over the highest wavenumber.
    pub nyquist_factor: f64,
    /// Largest accepted |nu - fit| / fit.
    pub residual_threshold_rel: f64,
    pub exclusion_zones: Vec<ExclusionZone>,
    /// Fewer points than this and a mode is not fitted at all.
    pub spline_segment_min_points: usize,
    /// A peak is assigned to the nearest reference branch only if it lies
    /// within this relative wavenumber distance.
    pub assign_tolerance_rel: f64,
    /// Width of the frequency windows of the linear pass, Hz.
    pub linear_window_hz: f64,
    /// Windows with fewer points skip the linear pass.
    pub linear_min_points: usize,
    /// A window's line is trusted where a quadratic lowers the weighted
    /// residual sum of squares by less than this fraction...
    pub curvature_gate: f64,
    /// ...or departs from the line by less than this relative amount.
    pub curvature_tolerance_rel: f64,
    /// Reweighting iterations of the robust fits.
    pub robust_iterations: usize,
    /// Lower bound on the robust relative residual scale.
    pub robust_scale_floor_rel: f64,
    /// Half width of the neighbourhood counted for the density weights, as a
    /// fraction of the mode's frequency span.
    pub density_window_rel: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            path_length: 0.32,
            min_spacing: 0.5e-3,
            thickness_mm: 2.04,
            lambda_factor: 10.0,
            nyquist_factor: 2.0,
            residual_threshold_rel: 0.03,
            exclusion_zones: default_zones(),
            spline_segment_min_points: 10,
            assign_tolerance_rel: 0.1,
            linear_window_hz: 50e3,
            linear_min_points: 8,
            curvature_gate: 0.1,
            curvature_tolerance_rel: 0.005,
            robust_iterations: 10,
            robust_scale_floor_rel: 0.005,
            density_window_rel: 0.02,
        }
    }
}

impl FilterConfig {
    /// `(10 / L, 1 / (2 dx))` with the configured factors.
    pub fn nu_bounds(&self) -> (f64, f64) {
        (
            self.lambda_factor / self.path_length,
            1.0 / (self.min_spacing * self.nyquist_factor),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("path_length", self.path_length),
            ("min_spacing", self.min_spacing),
            ("thickness_mm", self.thickness_mm),
            ("lambda_factor", self.lambda_factor),
            ("nyquist_factor", self.nyquist_factor),
            ("residual_threshold_rel", self.residual_threshold_rel),
            ("linear_window_hz", self.linear_window_hz),
            ("density_window_rel", self.density_window_rel),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "filter {name} must be positive, got {v}"
                )));
            }
        }
        let (lo, hi) = self.nu_bounds();
        if lo >= hi {
            return Err(Error::Config(format!(
                "wavenumber bounds are empty: {lo} >= {hi} 1/m"
            )));
        }
        for z in &self.exclusion_zones {
            if !z.fd_min.is_finite() || z.fd_max.is_some_and(|hi| !(hi >= z.fd_min)) {
                return Err(Error::Config(format!(
                    "exclusion zone `{}` is not a valid interval",
                    z.reason
                )));
            }
        }
        Ok(())
    }

    pub fn fd(&self, f: f64) -> f64 {
        f * self.thickness_mm * 1e-6
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    BelowNuMin,
    AboveNuMax,
    /// No reference branch close enough.
    Unassigned,
    ExclusionZone(String),
    /// Weaker of two peaks given the same mode at one frequency.
    Duplicate,
    /// Too few points left in the mode to fit.
    InsufficientPoints,
    LinearResidual,
    SplineResidual,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::BelowNuMin => f.write_str("below_nu_min"),
            RejectReason::AboveNuMax => f.write_str("above_nu_max"),
            RejectReason::Unassigned => f.write_str("unassigned"),
            RejectReason::ExclusionZone(tag) => write!(f, "exclusion_zone/{tag}"),
            RejectReason::Duplicate => f.write_str("duplicate"),
            RejectReason::InsufficientPoints => f.write_str("insufficient_points"),
            RejectReason::LinearResidual => f.write_str("linear_residual"),
            RejectReason::SplineResidual => f.write_str("spline_residual"),
        }
    }
}

/// A detected peak with the mode it was attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePeak {
    pub peak: Peak,
    pub mode: Option<ModeLabel>,
}

impl ModePeak {
    pub fn unassigned(peak: Peak) -> Self {
        Self { peak, mode: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub peak: ModePeak,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModeCounts {
    pub kept: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: Vec<ModePeak>,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
}

impl FilterReport {
    fn split(
        peaks: Vec<ModePeak>,
        mut verdict: impl FnMut(&ModePeak) -> Option<RejectReason>,
    ) -> Self {
        let mut r = Self::default();
        for p in peaks {
            match verdict(&p) {
                Some(reason) => r.rejected.push(Rejection { peak: p, reason }),
                None => r.kept.push(p),
            }
        }
        r
    }

    /// Runs `stage` on the kept peaks and merges its verdicts into `self`.
    pub fn then(
        mut self,
        stage: impl FnOnce(Vec<ModePeak>) -> Result<FilterReport>,
    ) -> Result<Self> {
        let next = stage(std::mem::take(&mut self.kept))?;
        self.kept = next.kept;
        self.rejected.extend(next.rejected);
        self.warnings.extend(next.warnings);
        Ok(self)
    }

    /// Kept points of one mode, ascending in frequency.
    pub fn kept_for(&self, mode: ModeLabel) -> Vec<Peak> {
        let mut v: Vec<Peak> = self
            .kept
            .iter()
            .filter(|p| p.mode == Some(mode))
            .map(|p| p.peak)
            .collect();
        v.sort_by(|a, b| a.f.total_cmp(&b.f));
        v
    }

    /// Kept and rejected counts keyed by mode name (`unassigned` for none).
    pub fn summary(&self) -> BTreeMap<String, ModeCounts> {
        let key =
            |m: Option<ModeLabel>| m.map_or_else(|| "unassigned".to_string(), |m| m.to_string());
        let mut s: BTreeMap<String, ModeCounts> = BTreeMap::new();
        for p in &self.kept {
            s.entry(key(p.mode)).or_default().kept += 1;
        }
        for r in &self.rejected {
            s.entry(key(r.peak.mode)).or_default().rejected += 1;
        }
        s
    }

    /// Rows `mode,f_hz,fd_mhzmm,nu_1pm,cp_mps,mag,status,reason`, sorted.
    pub fn write_csv<W: Write>(&self, w: W, cfg: &FilterConfig) -> Result<()> {
        let mut rows: Vec<(Option<ModeLabel>, Peak, String)> = self
            .kept
            .iter()
            .map(|p| (p.mode, p.peak, String::new()))
            .chain(
                self.rejected
                    .iter()
                    .map(|r| (r.peak.mode, r.peak.peak, r.reason.to_string())),
            )
            .collect();
        rows.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.f.total_cmp(&b.1.f))
                .then(a.1.nu.total_cmp(&b.1.nu))
        });
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Parse {
            source_name: "filter report".into(),
            location: "write".into(),
            message: e.to_string(),
        };
        wtr.write_record([
            "mode", "f_hz", "fd_mhzmm", "nu_1pm", "cp_mps", "mag", "status", "reason",
        ])
        .map_err(err)?;
        for (mode, p, reason) in rows {
            let status = if reason.is_empty() {
                "kept"
            } else {
                "rejected"
            };
            wtr.write_record([
                mode.map(|m| m.to_string()).unwrap_or_default(),
                p.f.to_string(),
                cfg.fd(p.f).to_string(),
                p.nu.to_string(),
                p.phase_velocity().to_string(),
                p.magnitude.to_string(),
                status.to_string(),
                reason,
            ])
            .map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::io("<filter report>", e))
    }
}

/// Kept rows of a report written by [`FilterReport::write_csv`]. The report
/// carries no prominence, so it reads back as zero.
pub fn read_kept_csv<R: Read>(r: R) -> Result<Vec<(ModeLabel, Peak)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let err = |location: String, message: String| Error::Parse {
        source_name: "filter report".into(),
        location,
        message,
    };
    let headers = rdr
        .headers()
        .map_err(|e| err("header".into(), e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let (i_mode, i_f, i_nu, i_mag, i_status) = (
        col("mode")?,
        col("f_hz")?,
        col("nu_1pm")?,
        col("mag")?,
        col("status")?,
    );
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let loc = format!("record {}", n + 1);
        let rec = rec.map_err(|e| err(loc.clone(), e.to_string()))?;
        if rec.get(i_status) != Some("kept") {
            continue;
        }
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| err(loc.clone(), format!("{}: {e}", &headers[i])))
        };
        let mode: ModeLabel = rec
            .get(i_mode)
            .unwrap_or("")
            .parse()
            .map_err(|e: Error| err(loc.clone(), e.to_string()))?;
        out.push((
            mode,
            Peak {
                f: num(i_f)?,
                nu: num(i_nu)?,
                magnitude: num(i_mag)?,
                prominence: 0.0,
                refined: true,
            },
        ));
    }
    Ok(out)
}

/// Rejects peaks below `10 / L` or above `1 / (2 dx)`.
pub fn apply_bounds(peaks: Vec<ModePeak>, cfg: &FilterConfig) -> FilterReport {
    let (lo, hi) = cfg.nu_bounds();
    FilterReport::split(peaks, |p| {
        if p.peak.nu < lo {
            Some(RejectReason::BelowNuMin)
        } else if p.peak.nu > hi {
            Some(RejectReason::AboveNuMax)
        } else {
            None
        }
    })
}

/// Rejects peaks inside an exclusion zone that applies to their mode.
pub fn apply_exclusions(peaks: Vec<ModePeak>, cfg: &FilterConfig) -> FilterReport {
    FilterReport::split(peaks, |p| {
        let fd = cfg.fd(p.peak.f);
        cfg.exclusion_zones
            .iter()
            .find(|z| z.contains(fd, p.mode))
            .map(|z| RejectReason::ExclusionZone(z.reason.clone()))
    })
}

/// Attributes every peak to the reference branch closest in relative
/// wavenumber among those defined at its frequency.
pub fn assign_modes(
    peaks: &[Peak],
    reference: &[DispersionBranch],
    cfg: &FilterConfig,
) -> Result<FilterReport> {
    let interps: Vec<(ModeLabel, Pchip)> = reference
        .iter()
        .filter(|b| b.points.len() >= 2)
        .map(|b| {
            Pchip::new(b.frequencies(), b.points.iter().map(|p| p.nu()).collect())
                .map(|p| (b.label, p))
        })
        .collect::<Result<_>>()?;
    let assigned = peaks
        .iter()
        .map(|&peak| {
            let best = interps
                .iter()
                .filter_map(|(label, p)| {
                    let nu = p.eval(peak.f)?;
                    Some((*label, ((peak.nu - nu) / nu).abs()))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let mode = best
                .filter(|b| b.1 <= cfg.assign_tolerance_rel)
                .map(|b| b.0);
            ModePeak { peak, mode }
        })
        .collect();
    Ok(FilterReport::split(assigned, |p| {
        p.mode.is_none().then_some(RejectReason::Unassigned)
    }))
}

/// Fit-residual rejection for the points of one mode.
///
/// The strongest peak per frequency is kept. A robust straight line is
/// fitted in each frequency window where the curvature gate allows it and a
/// robust, density-weighted cubic smoothing spline covers the rest. The
/// worst point is removed and the fits redone until every residual is within
/// the threshold. Loosening the threshold never rejects more, and filtering
/// the kept points again rejects nothing.
pub fn fit_reject(peaks: Vec<ModePeak>, cfg: &FilterConfig) -> Result<FilterReport> {
    let mode = peaks.first().and_then(|p| p.mode);
    let name = mode.map_or_else(|| "unassigned".to_string(), |m| m.to_string());
    if peaks.iter().any(|p| p.mode != mode) {
        return Err(Error::Domain(
            "fit_reject expects points of a single mode".into(),
        ));
    }

    let mut sorted = peaks;
    sorted.sort_by(|a, b| {
        a.peak
            .f
            .total_cmp(&b.peak.f)
            .then(b.peak.magnitude.total_cmp(&a.peak.magnitude))
    });
    let mut report = FilterReport::default();
    let mut pts: Vec<ModePeak> = Vec::with_capacity(sorted.len());
    for p in sorted {
        if pts.last().is_some_and(|q| q.peak.f == p.peak.f) {
            report.rejected.push(Rejection {
                peak: p,
                reason: RejectReason::Duplicate,
            });
        } else {
            pts.push(p);
        }
    }
    let need = cfg.spline_segment_min_points.max(4);
    let thr = cfg.residual_threshold_rel;
    // Backward elimination: refit, drop the single worst point if it misses
    // by more than the threshold, repeat. The removal order does not depend
    // on the threshold, so kept sets are nested in it, and the kept set is a
    // stopping point of the sequence, so a second run removes nothing.
    loop {
        if pts.len() < need {
            return Err(Error::InsufficientPoints {
                mode: name,
                got: pts.len(),
                need,
            });
        }
        let scores = residual_scores(&pts, cfg);
        let worst = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.abs().total_cmp(&b.1 .0.abs()).then(b.0.cmp(&a.0)));
        match worst {
            Some((i, &(r, ref reason))) if r.abs() > thr => {
                report.rejected.push(Rejection {
                    reason: reason.clone(),
                    peak: pts.remove(i),
                });
            }
            _ => break,
        }
    }
    report.kept = pts;
    Ok(report)
}

/// Relative residual of every point against the robust line of its window
/// where that line is trusted, against the robust spline elsewhere.
fn residual_scores(pts: &[ModePeak], cfg: &FilterConfig) -> Vec<(f64, RejectReason)> {
    let x: Vec<f64> = pts.iter().map(|p| p.peak.f).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.peak.nu).collect();
    let linear = linear_pass(&x, &y, cfg);
    let spline = linear
        .iter()
        .any(Option::is_none)
        .then(|| robust_spline(&x, &y, &density_weights(&x, cfg.density_window_rel), cfg));
    (0..pts.len())
        .map(|i| match (linear[i], &spline) {
            (Some(r), _) => (r, RejectReason::LinearResidual),
            (None, Some(s)) => (rel(y[i], s[i]), RejectReason::SplineResidual),
            (None, None) => unreachable!(),
        })
        .collect()
}

/// Full chain: assignment, bounds, exclusions, then per-mode fits. Modes
/// with too few points are dropped with a warning.
pub fn filter(
    peaks: &[Peak],
    reference: &[DispersionBranch],
    cfg: &FilterConfig,
) -> Result<FilterReport> {
    cfg.validate()?;
    let report = assign_modes(peaks, reference, cfg)?
        .then(|p| Ok(apply_bounds(p, cfg)))?
        .then(|p| Ok(apply_exclusions(p, cfg)))?;
    report.then(|kept| fit_all(kept, cfg))
}

/// Per-mode [`fit_reject`], run in parallel over modes.
pub fn fit_all(peaks: Vec<ModePeak>, cfg: &FilterConfig) -> Result<FilterReport> {
    let mut groups: BTreeMap<Option<ModeLabel>, Vec<ModePeak>> = BTreeMap::new();
    for p in peaks {
        groups.entry(p.mode).or_default().push(p);
    }
    let parts: Vec<Result<FilterReport>> = groups
        .into_par_iter()
        .map(|(_, g)| match fit_reject(g.clone(), cfg) {
            Err(Error::InsufficientPoints { mode, got, need }) => {
                let mut r = FilterReport::split(g, |_| Some(RejectReason::InsufficientPoints));
                r.warnings.push(format!(
                    "mode {mode}: {got} points after filtering, {need} needed; mode dropped"
                ));
                Ok(r)
            }
            other => other,
        })
        .collect();
    let mut out = FilterReport::default();
    for p in parts {
        let p = p?;
        out.kept.extend(p.kept);
        out.rejected.extend(p.rejected);
        out.warnings.extend(p.warnings);
    }
    for w in &out.warnings {
        log::warn!("{w}");
    }
    Ok(out)
}

/// Lowest `f * d` (MHz mm) at which `branch` clears the lower wavenumber
/// bound, or `None` if it never does.
pub fn min_fd_for_branch(branch: &DispersionBranch, cfg: &FilterConfig) -> Option<f64> {
    let (lo, _) = cfg.nu_bounds();
    let pts = &branch.points;
    let j = pts.iter().position(|p| p.nu() >= lo)?;
    if j == 0 {
        return Some(cfg.fd(pts[0].f));
    }
    let p = Pchip::new(branch.frequencies(), pts.iter().map(|p| p.nu()).collect()).ok()?;
    let (mut a, mut b) = (pts[j - 1].f, pts[j].f);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if p.eval(m)? >= lo {
            b = m;
        } else {
            a = m;
        }
    }
    Some(cfg.fd(b))
}

fn rel(y: f64, fit: f64) -> f64 {
    (y - fit) / fit.abs().max(f64::MIN_POSITIVE)
}

fn bisquare(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (1.0 - u * u).powi(2)
    } else {
        0.0
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Bisquare weights from relative residuals with a floored MAD scale.
fn robust_weights(r: &[f64], floor: f64) -> Vec<f64> {
    let s = (1.4826 * median(r.iter().map(|v| v.abs()).collect())).max(floor);
    r.iter().map(|v| bisquare(v / (BISQUARE_C * s))).collect()
}

/// Weighted polynomial least squares of degree 1 or 2 in centred, scaled
/// abscissae. Returns fitted values.
fn poly_fit(t: &[f64], y: &[f64], w: &[f64], degree: usize) -> Option<Vec<f64>> {
    let m = degree + 1;
    let mut a = Matrix3::<f64>::zeros();
    let mut b = Vector3::<f64>::zeros();
    for ((&ti, &yi), &wi) in t.iter().zip(y).zip(w) {
        let basis = [1.0, ti, ti * ti];
        for r in 0..m {
            b[r] += wi * basis[r] * yi;
            for c in 0..m {
                a[(r, c)] += wi * basis[r] * basis[c];
            }
        }
    }
    for r in m..3 {
        a[(r, r)] = 1.0;
    }
    let coef = a.cholesky()?.solve(&b);
    Some(
        t.iter()
            .map(|&ti| coef[0] + coef[1] * ti + coef[2] * ti * ti)
            .collect(),
    )
}

/// Siegel's repeated-median line, a start that survives up to half the
/// points being outliers. Returns fitted values.
fn repeated_median_line(t: &[f64], y: &[f64]) -> Vec<f64> {
    let slopes: Vec<f64> = (0..t.len())
        .map(|i| {
            median(
                (0..t.len())
                    .filter(|&j| j != i && t[j] != t[i])
                    .map(|j| (y[j] - y[i]) / (t[j] - t[i]))
                    .collect(),
            )
        })
        .collect();
    let b = median(slopes);
    let a = median(t.iter().zip(y).map(|(&ti, &yi)| yi - b * ti).collect());
    t.iter().map(|&ti| a + b * ti).collect()
}

/// Relative residual of the robust line for every point in a window where
/// the line is trusted, `None` elsewhere.
fn linear_pass(x: &[f64], y: &[f64], cfg: &FilterConfig) -> Vec<Option<f64>> {
    let mut out = vec![None; x.len()];
    let x0 = x[0];
    let mut bounds = Vec::new();
    let mut start = 0;
    while start < x.len() {
        let k = ((x[start] - x0) / cfg.linear_window_hz).floor();
        let end = start
            + x[start..]
                .iter()
                .take_while(|&&v| ((v - x0) / cfg.linear_window_hz).floor() == k)
                .count();
        bounds.push((start, end));
        start = end;
    }
    // A short last window joins its neighbour.
    let min = cfg.linear_min_points.max(4);
    if bounds.len() > 1 && bounds[bounds.len() - 1].1 - bounds[bounds.len() - 1].0 < min {
        let (_, end) = bounds.pop().unwrap();
        bounds.last_mut().unwrap().1 = end;
    }
    for (start, end) in bounds {
        if end - start >= min {
            if let Some(r) = window_line(&x[start..end], &y[start..end], cfg) {
                for (o, v) in out[start..end].iter_mut().zip(r) {
                    *o = Some(v);
                }
            }
        }
    }
    out
}

fn window_line(x: &[f64], y: &[f64], cfg: &FilterConfig) -> Option<Vec<f64>> {
    let mid = 0.5 * (x[0] + x[x.len() - 1]);
    let half = (0.5 * (x[x.len() - 1] - x[0])).max(f64::MIN_POSITIVE);
    let t: Vec<f64> = x.iter().map(|v| (v - mid) / half).collect();
    let mut w = vec![1.0; x.len()];
    let mut fit = repeated_median_line(&t, y);
    for _ in 0..cfg.robust_iterations {
        let r: Vec<f64> = y.iter().zip(&fit).map(|(&a, &b)| rel(a, b)).collect();
        let nw = robust_weights(&r, cfg.robust_scale_floor_rel);
        let change = nw
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = nw;
        fit = poly_fit(&t, y, &w, 1)?;
        if change < 1e-9 {
            break;
        }
    }
    let quad = poly_fit(&t, y, &w, 2)?;
    let wrss = |f: &[f64]| -> f64 {
        y.iter()
            .zip(f)
            .zip(&w)
            .map(|((a, b), wi)| wi * (a - b) * (a - b))
            .sum()
    };
    let (lin, q) = (wrss(&fit), wrss(&quad));
    let improvement = if lin > 0.0 { (lin - q) / lin } else { 0.0 };
    let bend = quad
        .iter()
        .zip(&fit)
        .map(|(&a, &b)| rel(a, b).abs())
        .fold(0.0, f64::max);
    (improvement < cfg.curvature_gate || bend < cfg.curvature_tolerance_rel)
        .then(|| y.iter().zip(&fit).map(|(&a, &b)| rel(a, b)).collect())
}

/// Neighbour counts within `+- rel_width * span`, scaled to unit mean.
fn density_weights(x: &[f64], rel_width: f64) -> Vec<f64> {
    let span = x[x.len() - 1] - x[0];
    let h = rel_width * span;
    let mut lo = 0;
    let mut hi = 0;
    let counts: Vec<f64> = x
        .iter()
        .map(|&xi| {
            while x[lo] < xi - h {
                lo += 1;
            }
            while hi < x.len() && x[hi] <= xi + h {
                hi += 1;
            }
            (hi - lo) as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    counts.into_iter().map(|c| c / mean).collect()
}

/// Median of `y[i - h ..= i + h]`, clipped at the ends.
fn running_median(y: &[f64], h: usize) -> Vec<f64> {
    (0..y.len())
        .map(|i| median(y[i.saturating_sub(h)..(i + h + 1).min(y.len())].to_vec()))
        .collect()
}

/// Iteratively reweighted smoothing spline; returns fitted values.
fn robust_spline(x: &[f64], y: &[f64], density: &[f64], cfg: &FilterConfig) -> Vec<f64> {
    let start: Vec<f64> = y
        .iter()
        .zip(running_median(y, 3))
        .map(|(&a, b)| rel(a, b))
        .collect();
    let mut robust = robust_weights(&start, cfg.robust_scale_floor_rel);
    let weights = |r: &[f64]| -> Vec<f64> { density.iter().zip(r).map(|(d, r)| d * r).collect() };
    let mut fit = smoothing_spline(x, y, &weights(&robust)).values;
    for _ in 0..cfg.robust_iterations {
        let r: Vec<f64> = y.iter().zip(&fit).map(|(&a, &b)| rel(a, b)).collect();
        let nw = robust_weights(&r, cfg.robust_scale_floor_rel);
        let change = nw
            .iter()
            .zip(&robust)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        robust = nw;
        fit = smoothing_spline(x, y, &weights(&robust)).values;
        if change < 1e-6 {
            break;
        }
    }
    fit
}

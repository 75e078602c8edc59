//! Root search over `(f, k)`, branch continuation and labeling.

use std::collections::BTreeMap;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::branch::{BranchPoint, DispersionBranch, ModeClass, ModeLabel};
use super::{LaminateModel, SurfaceMotion};
use crate::error::{Error, Result};
use crate::materials::Laminate;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Phase-velocity window of the k scan (m/s).
    pub c_min: f64,
    pub c_max: f64,
    /// Explicit wavenumber interval; overrides the velocity window.
    pub k_range: Option<(f64, f64)>,
    /// Log-spaced scan points per frequency.
    pub scan_points: usize,
    /// Relative bracket width at which refinement stops.
    pub k_rel_tol: f64,
    /// Required depth of a root below the background at `k (1 +- 0.01)`.
    pub min_drop: f64,
    /// Roots closer than this many scan cells trigger a denser rescan.
    pub crowding_cells: f64,
    pub max_rescans: usize,
    /// Continuation window: relative part and slope multiplier.
    pub window_rel: f64,
    pub window_slope: f64,
    /// Consecutive frequencies a branch may miss before it is closed.
    pub max_misses: usize,
    /// Worker threads for the per-frequency search; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            c_min: 300.0,
            c_max: 15_000.0,
            k_range: None,
            scan_points: 2000,
            k_rel_tol: 1e-7,
            min_drop: 6.0,
            crowding_cells: 3.0,
            max_rescans: 3,
            window_rel: 0.02,
            window_slope: 3.0,
            max_misses: 3,
            workers: None,
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.c_min > 0.0
            && self.c_max > self.c_min
            && self.scan_points >= 3
            && self.k_rel_tol > 0.0
            && self.window_rel > 0.0
            && self.k_range.is_none_or(|(a, b)| a > 0.0 && b > a);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid sweep configuration: {self:?}"
            )))
        }
    }

    fn k_bounds(&self, f: f64) -> (f64, f64) {
        self.k_range
            .unwrap_or((TWO_PI * f / self.c_max, TWO_PI * f / self.c_min))
    }
}

/// One accepted root of the characteristic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub f: f64,
    pub k: f64,
    pub class: ModeClass,
    /// Normalized `(|u1|, |u2|, |u3|)` over both surfaces.
    pub signature: [f64; 3],
    /// Depth below the local background in natural-log units.
    pub drop: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub branches: Vec<DispersionBranch>,
    /// Raw roots per frequency, in the order of the frequency grid.
    pub roots: Vec<Vec<Root>>,
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn branch(&self, label: ModeLabel) -> Option<&DispersionBranch> {
        self.branches.iter().find(|b| b.label == label)
    }
}

/// Computes labeled dispersion branches of `laminate` on `f_grid` (Hz).
pub fn dispersion_sweep(
    laminate: &Laminate,
    f_grid: &[f64],
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    cfg.validate()?;
    if f_grid.is_empty() {
        return Err(Error::Domain("empty frequency grid".into()));
    }
    if f_grid.iter().any(|f| !(*f > 0.0)) || f_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "frequency grid must be positive and strictly ascending".into(),
        ));
    }
    let model = LaminateModel::new(laminate);
    let search = |f: &f64| find_roots(&model, *f, cfg);
    let per_f: Vec<(Vec<Root>, Vec<String>)> = match cfg.workers {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| f_grid.par_iter().map(search).collect::<Result<_>>())?,
        _ => f_grid.par_iter().map(search).collect::<Result<_>>()?,
    };
    let mut warnings = Vec::new();
    let mut roots = Vec::with_capacity(per_f.len());
    for (r, w) in per_f {
        warnings.extend(w);
        roots.push(r);
    }
    let branches = trace(f_grid, &roots, cfg, &mut warnings)?;
    for w in &warnings {
        warn!("{w}");
    }
    Ok(SweepResult {
        branches,
        roots,
        warnings,
    })
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// All roots at one frequency, sorted by ascending k.
pub fn find_roots(
    model: &LaminateModel,
    f: f64,
    cfg: &SweepConfig,
) -> Result<(Vec<Root>, Vec<String>)> {
    let (k_lo, k_hi) = cfg.k_bounds(f);
    let mut warnings = Vec::new();
    let mut roots = scan_interval(model, f, k_lo, k_hi, cfg.scan_points, cfg, &mut warnings);
    let cell = (k_hi / k_lo).ln() / (cfg.scan_points - 1) as f64;
    for pass in 1..=cfg.max_rescans {
        let density = 1usize << pass;
        let crowded: Vec<(f64, f64)> = roots
            .windows(2)
            .filter(|w| (w[1].k / w[0].k).ln() < cfg.crowding_cells * cell)
            .map(|w| (w[0].k * (-3.0 * cell).exp(), w[1].k * (3.0 * cell).exp()))
            .collect();
        if crowded.is_empty() {
            break;
        }
        let before = roots.len();
        for (a, b) in crowded {
            let n = (((b / a).ln() / cell).ceil() as usize + 1) * density + 1;
            let extra = scan_interval(model, f, a.max(k_lo), b.min(k_hi), n, cfg, &mut warnings);
            roots.extend(extra);
        }
        dedupe(&mut roots);
        if roots.len() == before {
            break;
        }
        debug!(
            "f = {f}: rescan pass {pass} found {} roots",
            roots.len() - before
        );
    }
    Ok((roots, warnings))
}

fn dedupe(roots: &mut Vec<Root>) {
    roots.sort_by(|a, b| a.k.total_cmp(&b.k));
    roots.dedup_by(|b, a| (b.k - a.k).abs() <= 1e-6 * a.k);
}

fn scan_interval(
    model: &LaminateModel,
    f: f64,
    k_lo: f64,
    k_hi: f64,
    n: usize,
    cfg: &SweepConfig,
    warnings: &mut Vec<String>,
) -> Vec<Root> {
    let ks = log_spaced(k_lo, k_hi, n.max(3));
    let mut failed = 0usize;
    let phi: Vec<f64> = ks
        .iter()
        .map(|&k| match model.characteristic(f, k) {
            Ok(e) if !e.log_abs_reduced.is_nan() => e.log_abs_reduced,
            Ok(_) => {
                failed += 1;
                f64::NAN
            }
            Err(_) => {
                failed += 1;
                f64::NAN
            }
        })
        .collect();
    if failed > 0 {
        warnings.push(format!(
            "f = {f:.6e} Hz: characteristic failed at {failed} of {} scan points",
            ks.len()
        ));
    }
    let mut roots = Vec::new();
    for i in 1..ks.len() - 1 {
        let (l, m, r) = (phi[i - 1], phi[i], phi[i + 1]);
        if !(m.is_finite() || m == f64::NEG_INFINITY) || l.is_nan() || r.is_nan() {
            continue;
        }
        if !(m < l && m <= r) {
            continue;
        }
        let k = if m == f64::NEG_INFINITY {
            ks[i]
        } else {
            refine(model, f, ks[i - 1], ks[i + 1], cfg)
        };
        if let Some(root) = accept(model, f, k, cfg) {
            roots.push(root);
        }
    }
    dedupe(&mut roots);
    roots
}

/// Bisection on the sign of the k-derivative of `ln |det|`.
fn refine(model: &LaminateModel, f: f64, mut a: f64, mut b: f64, cfg: &SweepConfig) -> f64 {
    let phi = |k: f64| {
        model
            .characteristic(f, k)
            .map(|e| e.log_abs_reduced)
            .unwrap_or(f64::NAN)
    };
    while b - a > cfg.k_rel_tol * 0.5 * (a + b) {
        let m = 0.5 * (a + b);
        let eps = 1e-3 * (b - a);
        let (lo, hi) = (phi(m - eps), phi(m + eps));
        if lo == f64::NEG_INFINITY || hi == f64::NEG_INFINITY {
            return if lo == f64::NEG_INFINITY {
                m - eps
            } else {
                m + eps
            };
        }
        if lo.is_nan() || hi.is_nan() {
            break;
        }
        if hi < lo {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn accept(model: &LaminateModel, f: f64, k: f64, cfg: &SweepConfig) -> Option<Root> {
    let phi = |k: f64| model.characteristic(f, k).ok().map(|e| e.log_abs_reduced);
    let at = phi(k).filter(|v| !v.is_nan())?;
    let bg = phi(k * 0.99)?.max(phi(k * 1.01)?);
    let drop = if at == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        bg - at
    };
    if !(drop >= cfg.min_drop) {
        return None;
    }
    let motion = model.surface_motion(f, k).ok()?;
    let (class, signature) = classify(&motion, model.is_symmetric());
    Some(Root {
        f,
        k,
        class,
        signature,
        drop,
    })
}

/// Sorts a root into a polarization family from its surface motion.
pub fn classify(m: &SurfaceMotion, symmetric_layup: bool) -> (ModeClass, [f64; 3]) {
    let mut sig = [0.0; 3];
    for i in 0..3 {
        sig[i] = m.top[i].norm() + m.bottom[i].norm();
    }
    let total: f64 = sig.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return (ModeClass::Mixed, [0.0; 3]);
    }
    sig.iter_mut().for_each(|s| *s /= total);

    let sh = sig[1];
    let lamb = sig[0] + sig[2];
    if sh.min(lamb) > 0.3 * sh.max(lamb) {
        return (ModeClass::Mixed, sig);
    }
    // Midplane parity: u1, u2 even and u3 odd for symmetric motion.
    let parity = |s: [f64; 3]| -> f64 {
        (0..3)
            .map(|i| (m.top[i] - s[i] * m.bottom[i]).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let rs = parity([1.0, 1.0, -1.0]);
    let ra = parity([-1.0, -1.0, 1.0]);
    let clear = rs.min(ra) <= 0.1 * rs.max(ra);
    if symmetric_layup && !clear {
        return (ModeClass::Mixed, sig);
    }
    let class = match (sh > lamb, rs < ra) {
        (false, true) => ModeClass::Symmetric,
        (false, false) => ModeClass::Antisymmetric,
        (true, true) => ModeClass::SymmetricSh,
        (true, false) => ModeClass::AntisymmetricSh,
    };
    (class, sig)
}

struct Track {
    class: ModeClass,
    points: Vec<BranchPoint>,
    sig_sum: [f64; 3],
    misses: usize,
    open: bool,
}

impl Track {
    fn new(r: &Root) -> Self {
        Self {
            class: r.class,
            points: vec![BranchPoint::new(r.f, r.k)],
            sig_sum: r.signature,
            misses: 0,
            open: true,
        }
    }

    fn push(&mut self, r: &Root) {
        self.points.push(BranchPoint::new(r.f, r.k));
        (0..3).for_each(|i| self.sig_sum[i] += r.signature[i]);
        self.misses = 0;
    }

    /// Predicted phase velocity at `f` and the continuation window around it.
    fn window(&self, f: f64, cfg: &SweepConfig) -> (f64, f64) {
        let n = self.points.len();
        let last = self.points[n - 1];
        let slope = if n < 2 {
            0.0
        } else {
            let prev = self.points[n - 2];
            (last.c_p - prev.c_p) / (last.f - prev.f)
        };
        let pred = last.c_p + slope * (f - last.f);
        // Without a slope estimate the first step gets a wider window.
        let rel = if n < 2 {
            10.0 * cfg.window_rel
        } else {
            cfg.window_rel
        };
        let w = (rel * pred.abs()).max(cfg.window_slope * slope.abs() * (f - last.f));
        (pred, w)
    }

    fn miss(&mut self, f: f64, cfg: &SweepConfig, warnings: &mut Vec<String>) {
        self.misses += 1;
        let last = self.points[self.points.len() - 1];
        warnings.push(format!(
            "{:?} branch last seen at f = {:.6e} Hz (c = {:.1} m/s): no root within the continuation window at f = {f:.6e} Hz",
            self.class, last.f, last.c_p
        ));
        if self.misses > cfg.max_misses {
            self.open = false;
        }
    }
}

fn c_of(r: &Root) -> f64 {
    TWO_PI * r.f / r.k
}

/// Follows the slowest root of `class`. Branches of one symmetry family do
/// not cross, so the slowest root is the fundamental wherever it was found;
/// a slowest root far above the prediction means the fundamental was missed.
fn fundamental_track(
    class: ModeClass,
    f_grid: &[f64],
    roots: &[Vec<Root>],
    taken: &mut [Vec<bool>],
    cfg: &SweepConfig,
    warnings: &mut Vec<String>,
) -> Option<Track> {
    let slowest = |fi: usize| {
        roots[fi]
            .iter()
            .enumerate()
            .filter(|(_, r)| r.class == class)
            .max_by(|a, b| a.1.k.total_cmp(&b.1.k))
    };
    let start = (0..f_grid.len().min(cfg.max_misses + 1)).find(|&fi| slowest(fi).is_some())?;
    let (ri, r) = slowest(start)?;
    let mut track = Track::new(r);
    taken[start][ri] = true;
    for fi in start + 1..f_grid.len() {
        let f = f_grid[fi];
        match slowest(fi) {
            Some((ri, r))
                if track.points.len() < 2 || {
                    let (pred, w) = track.window(f, cfg);
                    c_of(r) <= pred + w
                } =>
            {
                track.push(r);
                taken[fi][ri] = true;
            }
            _ => {
                track.miss(f, cfg, warnings);
                if !track.open {
                    break;
                }
            }
        }
    }
    Some(track)
}

fn trace(
    f_grid: &[f64],
    roots: &[Vec<Root>],
    cfg: &SweepConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<DispersionBranch>> {
    let mut taken: Vec<Vec<bool>> = roots.iter().map(|r| vec![false; r.len()]).collect();
    let mut fundamentals = Vec::new();
    for class in [
        ModeClass::Antisymmetric,
        ModeClass::Symmetric,
        ModeClass::SymmetricSh,
    ] {
        if let Some(t) = fundamental_track(class, f_grid, roots, &mut taken, cfg, warnings) {
            fundamentals.push(t);
        }
    }

    // Nearest-velocity continuation for everything else.
    let mut tracks: Vec<Track> = Vec::new();
    for (fi, &f) in f_grid.iter().enumerate() {
        let here = &roots[fi];
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, t) in tracks.iter().enumerate().filter(|(_, t)| t.open) {
            let (pred, window) = t.window(f, cfg);
            for (ri, r) in here.iter().enumerate() {
                if taken[fi][ri] || r.class != t.class {
                    continue;
                }
                let d = (c_of(r) - pred).abs();
                if d <= window {
                    pairs.push((d, ti, ri));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut matched = vec![false; tracks.len()];
        for (_, ti, ri) in pairs {
            if matched[ti] || taken[fi][ri] {
                continue;
            }
            matched[ti] = true;
            taken[fi][ri] = true;
            tracks[ti].push(&here[ri]);
        }
        for (ti, t) in tracks.iter_mut().enumerate() {
            if t.open && !matched[ti] {
                t.miss(f, cfg, warnings);
            }
        }
        for (ri, r) in here.iter().enumerate() {
            if !taken[fi][ri] && r.class != ModeClass::Mixed {
                taken[fi][ri] = true;
                tracks.push(Track::new(r));
            }
        }
    }
    // Single-point tracks are isolated detections, not branches.
    tracks.retain(|t| t.points.len() >= 2);
    name_tracks(fundamentals, tracks)
}

fn finish(label: ModeLabel, t: Track) -> Result<DispersionBranch> {
    let n = t.points.len() as f64;
    let sig = t.sig_sum.map(|s| s / n);
    DispersionBranch::new(label, t.points, sig)
}

fn name_tracks(fundamentals: Vec<Track>, tracks: Vec<Track>) -> Result<Vec<DispersionBranch>> {
    let ctor = |class: ModeClass| -> fn(u32) -> ModeLabel {
        match class {
            ModeClass::Antisymmetric => ModeLabel::A,
            ModeClass::Symmetric => ModeLabel::S,
            ModeClass::AntisymmetricSh => ModeLabel::Ash,
            ModeClass::SymmetricSh => ModeLabel::Ssh,
            ModeClass::Mixed => ModeLabel::Unlabeled,
        }
    };
    let mut out = Vec::new();
    for t in fundamentals {
        out.push(finish(ctor(t.class)(0), t)?);
    }
    let mut by_class: BTreeMap<ModeClass, Vec<Track>> = BTreeMap::new();
    for t in tracks {
        by_class.entry(t.class).or_default().push(t);
    }
    for (class, mut ts) in by_class {
        // Higher branches are numbered by where they enter the sweep.
        ts.sort_by(|a, b| {
            a.points[0]
                .f
                .total_cmp(&b.points[0].f)
                .then(a.points[0].c_p.total_cmp(&b.points[0].c_p))
        });
        for (i, t) in ts.into_iter().enumerate() {
            out.push(finish(ctor(class)(i as u32 + 1), t)?);
        }
    }
    Ok(out)
}

//! Non-uniform 2D DFT of a line-scan wavefield and per-frequency peak search.
//!
//! `F(f, nu) = sum_x sum_t v(t, x) exp(+i 2 pi f t) exp(-i 2 pi nu x)`, so a
//! wave `cos(2 pi (f t - nu x))` peaks at positive `(f, nu)`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavefield::Wavefield;

const MAGIC: &[u8; 4] = b"LFK1";

/// Scaling of the map. Only the raw double sum is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    Unnormalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FKMap {
    pub f_grid: Vec<f64>,
    pub nu_grid: Vec<f64>,
    /// `data[i_f * nu_grid.len() + i_nu]`
    pub data: Vec<Complex64>,
    pub norm: Norm,
}

impl FKMap {
    pub fn get(&self, i_f: usize, i_nu: usize) -> Complex64 {
        self.data[i_f * self.nu_grid.len() + i_nu]
    }

    pub fn row(&self, i_f: usize) -> &[Complex64] {
        let n = self.nu_grid.len();
        &self.data[i_f * n..(i_f + 1) * n]
    }

    /// Grid indices of the largest magnitude.
    pub fn argmax(&self) -> (usize, usize) {
        let n = self.nu_grid.len();
        let i = self
            .data
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (i / n, i % n)
    }

    /// Rows `f_hz,nu_1pm,abs,phase`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["f_hz", "nu_1pm", "abs", "phase"])
            .map_err(csv_err)?;
        for (i, f) in self.f_grid.iter().enumerate() {
            for (j, nu) in self.nu_grid.iter().enumerate() {
                let z = self.get(i, j);
                wtr.write_record([
                    f.to_string(),
                    nu.to_string(),
                    z.norm().to_string(),
                    z.arg().to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<fk csv>", e))
    }

    /// `LFK1` layout, little endian: magic, `u64` n_f, `u64` n_nu, `u8` norm
    /// tag, f grid, nu grid, then `(re, im)` pairs row by row.
    pub fn write_bin<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<fk bin>", e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&(self.f_grid.len() as u64).to_le_bytes())
            .map_err(io)?;
        w.write_all(&(self.nu_grid.len() as u64).to_le_bytes())
            .map_err(io)?;
        w.write_all(&[0u8]).map_err(io)?;
        for v in self.f_grid.iter().chain(&self.nu_grid) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes()).map_err(io)?;
            w.write_all(&z.im.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_bin<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io("<fk bin>", e))?;
        let err = |pos: usize, message: &str| Error::Parse {
            source_name: "LFK1".into(),
            location: format!("byte {pos}"),
            message: message.into(),
        };
        if !bytes.starts_with(MAGIC) {
            return Err(err(0, "missing LFK1 magic"));
        }
        let word = |pos: usize| -> Result<[u8; 8]> {
            bytes
                .get(pos..pos + 8)
                .map(|s| s.try_into().unwrap())
                .ok_or_else(|| err(pos, "truncated file"))
        };
        let nf = u64::from_le_bytes(word(4)?) as usize;
        let nn = u64::from_le_bytes(word(12)?) as usize;
        if bytes.get(20) != Some(&0) {
            return Err(err(20, "unknown norm tag"));
        }
        let need = nf
            .checked_add(nn)
            .and_then(|g| nf.checked_mul(nn)?.checked_mul(2)?.checked_add(g))
            .and_then(|w| w.checked_mul(8)?.checked_add(21))
            .ok_or_else(|| err(4, "grid sizes overflow"))?;
        if bytes.len() != need {
            return Err(err(
                bytes.len().min(need),
                "file size does not match grid sizes",
            ));
        }
        let vals: Vec<f64> = bytes[21..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let f_grid = vals[..nf].to_vec();
        let nu_grid = vals[nf..nf + nn].to_vec();
        let data = vals[nf + nn..]
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        Ok(Self {
            f_grid,
            nu_grid,
            data,
            norm: Norm::Unnormalized,
        })
    }

    pub fn save(&self, path: &Path, binary: bool) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        if binary {
            self.write_bin(&mut out)?;
        } else {
            self.write_csv(&mut out)?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        source_name: "csv".into(),
        location: e
            .position()
            .map(|p| format!("line {}", p.line()))
            .unwrap_or_else(|| "?".into()),
        message: e.to_string(),
    }
}

/// Wavenumbers `0, step, ..` up to `nu_max`, with `step = 1 / (zero_pad * L)`.
pub fn default_nu_grid(path_length: f64, nu_max: f64, zero_pad: f64) -> Vec<f64> {
    let step = 1.0 / (zero_pad * path_length);
    let n = (nu_max / step * (1.0 + 1e-12)).floor() as usize;
    (0..=n).map(|j| j as f64 * step).collect()
}

/// Evaluates the double sum on arbitrary grids: a time transform per
/// position (one FFT per trace when every frequency sits on a bin), then a
/// direct sum over the possibly non-uniform positions.
pub fn nudft2(w: &Wavefield, f_grid: &[f64], nu_grid: &[f64]) -> Result<FKMap> {
    if f_grid.is_empty() || nu_grid.is_empty() {
        return Err(Error::Domain("empty frequency or wavenumber grid".into()));
    }
    let nt = w.n_times();
    let nx = w.n_positions();
    if nt > 1 {
        let limit = 0.5 * w.sample_rate();
        if let Some(&f) = f_grid.iter().find(|f| !(f.abs() <= limit * (1.0 + 1e-12))) {
            return Err(Error::Nyquist {
                grid: "frequency",
                value: f,
                limit,
            });
        }
    }
    if nx > 1 {
        let limit = 0.5 / w.min_spacing();
        if let Some(&nu) = nu_grid.iter().find(|n| !(n.abs() <= limit * (1.0 + 1e-12))) {
            return Err(Error::Nyquist {
                grid: "wavenumber",
                value: nu,
                limit,
            });
        }
    }

    let time = time_stage(w, f_grid);
    let nf = f_grid.len();
    let nn = nu_grid.len();

    // F = T E with E[x, nu] = exp(-i 2 pi nu x), as four real products.
    let (mut er, mut ei) = (DMatrix::zeros(nx, nn), DMatrix::zeros(nx, nn));
    for (ix, &x) in w.positions().iter().enumerate() {
        for (j, &nu) in nu_grid.iter().enumerate() {
            let (s, c) = (2.0 * PI * nu * x).sin_cos();
            er[(ix, j)] = c;
            ei[(ix, j)] = -s;
        }
    }
    let tr = DMatrix::from_fn(nf, nx, |i, ix| time[ix][i].re);
    let ti = DMatrix::from_fn(nf, nx, |i, ix| time[ix][i].im);
    let re = &tr * &er - &ti * &ei;
    let im = &tr * &ei + &ti * &er;
    let mut data = Vec::with_capacity(nf * nn);
    for i in 0..nf {
        for j in 0..nn {
            data.push(Complex64::new(re[(i, j)], im[(i, j)]));
        }
    }
    Ok(FKMap {
        f_grid: f_grid.to_vec(),
        nu_grid: nu_grid.to_vec(),
        data,
        norm: Norm::Unnormalized,
    })
}

/// `T[ix][i] = sum_t v(t, x_ix) exp(+i 2 pi f_i t)`.
fn time_stage(w: &Wavefield, f_grid: &[f64]) -> Vec<Vec<Complex64>> {
    let nt = w.n_times();
    let t0 = w.times()[0];
    let dt = w.dt();
    let span = nt as f64 * dt;
    let bins: Option<Vec<usize>> = (nt > 1)
        .then(|| {
            f_grid
                .iter()
                .map(|&f| {
                    let b = f * span;
                    let r = b.round();
                    ((b - r).abs() <= 1e-9 * b.abs().max(1.0))
                        .then(|| r.rem_euclid(nt as f64) as usize)
                })
                .collect()
        })
        .flatten();
    let shift: Vec<Complex64> = f_grid
        .iter()
        .map(|&f| Complex64::from_polar(1.0, 2.0 * PI * f * t0))
        .collect();

    match bins {
        Some(bins) => {
            let fft = FftPlanner::new().plan_fft_inverse(nt);
            (0..w.n_positions())
                .into_par_iter()
                .map(|ix| {
                    let mut buf: Vec<Complex64> = w
                        .trace(ix)
                        .into_iter()
                        .map(|v| Complex64::new(v, 0.0))
                        .collect();
                    fft.process(&mut buf);
                    bins.iter().zip(&shift).map(|(&b, &s)| buf[b] * s).collect()
                })
                .collect()
        }
        None => (0..w.n_positions())
            .into_par_iter()
            .map(|ix| {
                let trace = w.trace(ix);
                f_grid
                    .iter()
                    .zip(&shift)
                    .map(|(&f, &s)| {
                        // Horner in the per-sample phasor; exact up to rounding.
                        let step = Complex64::from_polar(1.0, 2.0 * PI * f * dt);
                        let z = trace
                            .iter()
                            .rev()
                            .fold(Complex64::new(0.0, 0.0), |acc, &v| acc * step + v);
                        z * s
                    })
                    .collect()
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub f: f64,
    pub nu: f64,
    pub magnitude: f64,
    /// Topographic prominence relative to the row maximum.
    pub prominence: f64,
    /// Whether `nu` and `magnitude` come from the parabolic fit.
    pub refined: bool,
}

impl Peak {
    pub fn phase_velocity(&self) -> f64 {
        self.f / self.nu
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Rows `f_hz,nu_1pm,mag,prom`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["f_hz", "nu_1pm", "mag", "prom"])
            .map_err(csv_err)?;
        for p in &self.peaks {
            wtr.write_record([
                p.f.to_string(),
                p.nu.to_string(),
                p.magnitude.to_string(),
                p.prominence.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<peak csv>", e))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.into()))
        };
        let idx = [col("f_hz")?, col("nu_1pm")?, col("mag")?, col("prom")?];
        let mut peaks = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let mut v = [0.0; 4];
            for (k, &i) in idx.iter().enumerate() {
                v[k] = rec
                    .get(i)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse {
                        source_name: "peak csv".into(),
                        location: format!("line {line}"),
                        message: format!("column {}: {e}", headers.get(i).unwrap_or("?")),
                    })?;
            }
            peaks.push(Peak {
                f: v[0],
                nu: v[1],
                magnitude: v[2],
                prominence: v[3],
                refined: true,
            });
        }
        Ok(Self { peaks })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakSearchConfig {
    /// Peaks kept per frequency row, largest first.
    pub max_peaks: usize,
    /// Minimum prominence as a fraction of the row maximum.
    pub prominence_floor_rel: f64,
    /// A peak this many cells or fewer from a larger one is absorbed by it.
    pub merge_cells: usize,
}

impl Default for PeakSearchConfig {
    fn default() -> Self {
        Self {
            max_peaks: 16,
            prominence_floor_rel: 0.05,
            merge_cells: 2,
        }
    }
}

/// Strict local maxima of `|F(f, .)|` per row, filtered by prominence,
/// merged when closer than `merge_cells`, top `max_peaks` kept and refined
/// by a parabola through the log magnitudes of the three nearest cells.
pub fn peak_search(map: &FKMap, cfg: &PeakSearchConfig) -> PeakSet {
    let peaks = (0..map.f_grid.len())
        .into_par_iter()
        .flat_map_iter(|i| row_peaks(map, i, cfg))
        .collect();
    PeakSet { peaks }
}

fn row_peaks(map: &FKMap, i_f: usize, cfg: &PeakSearchConfig) -> Vec<Peak> {
    let mag: Vec<f64> = map.row(i_f).iter().map(|z| z.norm()).collect();
    let n = mag.len();
    let top = mag.iter().copied().fold(0.0, f64::max);
    if n < 3 || !(top > 0.0) {
        return Vec::new();
    }
    let mut cand: Vec<(usize, f64)> = (1..n - 1)
        .filter(|&j| mag[j] > mag[j - 1] && mag[j] > mag[j + 1])
        .map(|j| (j, prominence(&mag, j) / top))
        .filter(|&(_, p)| p >= cfg.prominence_floor_rel)
        .collect();
    cand.sort_by(|a, b| mag[b.0].total_cmp(&mag[a.0]));

    let mut kept: Vec<(usize, f64)> = Vec::new();
    for c in cand {
        if kept.iter().all(|k| k.0.abs_diff(c.0) > cfg.merge_cells) {
            kept.push(c);
            if kept.len() == cfg.max_peaks {
                break;
            }
        }
    }
    kept.into_iter()
        .map(|(j, prom)| {
            let (nu, m, refined) = refine(&map.nu_grid, &mag, j);
            Peak {
                f: map.f_grid[i_f],
                nu,
                magnitude: m,
                prominence: prom,
                refined,
            }
        })
        .collect()
}

/// Height above the higher of the two saddles towards larger neighbours.
fn prominence(mag: &[f64], j: usize) -> f64 {
    let h = mag[j];
    let mut left = h;
    for &m in mag[..j].iter().rev() {
        if m > h {
            break;
        }
        left = left.min(m);
    }
    let mut right = h;
    for &m in &mag[j + 1..] {
        if m > h {
            break;
        }
        right = right.min(m);
    }
    h - left.max(right)
}

fn refine(nu: &[f64], mag: &[f64], j: usize) -> (f64, f64, bool) {
    let (a, b, c) = (mag[j - 1], mag[j], mag[j + 1]);
    if !(a > 0.0 && c > 0.0) {
        return (nu[j], b, false);
    }
    let (x0, x1, x2) = (nu[j - 1], nu[j], nu[j + 1]);
    let (y0, y1, y2) = (a.ln(), b.ln(), c.ln());
    // Newton divided differences of the interpolating parabola
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if !(curv < 0.0) {
        return (nu[j], b, false);
    }
    let vertex = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
    let vertex = vertex.clamp(x0, x2);
    let y = y0 + d01 * (vertex - x0) + curv * (vertex - x0) * (vertex - x1);
    (vertex, y.exp(), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::{jittered_positions, uniform_positions};

    fn plane_wave(f0: f64, nu0: f64, positions: &[f64], nt: usize, dt: f64) -> Wavefield {
        let times: Vec<f64> = (0..nt).map(|n| n as f64 * dt).collect();
        let mut data = Vec::with_capacity(nt * positions.len());
        for t in &times {
            for x in positions {
                data.push((2.0 * PI * (f0 * t - nu0 * x)).cos());
            }
        }
        let l = positions[positions.len() - 1].max(1e-9);
        Wavefield::new(times, positions.to_vec(), data, l).unwrap()
    }

    fn map_row(values: &[f64]) -> FKMap {
        FKMap {
            f_grid: vec![1.0],
            nu_grid: (0..values.len()).map(|j| j as f64).collect(),
            data: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            norm: Norm::Unnormalized,
        }
    }

    #[test]
    fn plane_wave_hits_its_bin() {
        // 64 samples at 1 MHz, 32 positions at 1 mm: bins of 15.625 kHz and 31.25 1/m
        let x: Vec<f64> = (0..32).map(|i| i as f64 * 1e-3).collect();
        let w = plane_wave(5.0 * 15_625.0, 3.0 * 31.25, &x, 64, 1e-6);
        let f_grid: Vec<f64> = (0..32).map(|m| m as f64 * 15_625.0).collect();
        let nu_grid: Vec<f64> = (0..16).map(|j| j as f64 * 31.25).collect();
        let map = nudft2(&w, &f_grid, &nu_grid).unwrap();
        assert_eq!(map.argmax(), (5, 3));
        assert!((map.get(5, 3).norm() - 64.0 * 32.0 / 2.0).abs() < 1e-8);
    }

    #[test]
    fn direct_time_sum_matches_fft_path() {
        let x = uniform_positions(0.01, 9);
        let w = plane_wave(40e3, 300.0, &x, 50, 1e-6);
        let on_bins = [20e3, 40e3, 60e3];
        let map = nudft2(&w, &on_bins, &[250.0, 300.0]).unwrap();
        // a non-bin frequency forces the direct path for the whole grid
        let mixed = nudft2(&w, &[20e3, 40e3, 60e3, 41e3], &[250.0, 300.0]).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert!((map.get(i, j) - mixed.get(i, j)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn nyquist_violations() {
        let x = uniform_positions(0.01, 11);
        let w = plane_wave(1e3, 10.0, &x, 16, 1e-6);
        assert!(matches!(
            nudft2(&w, &[0.6e6], &[0.0]),
            Err(Error::Nyquist {
                grid: "frequency",
                ..
            })
        ));
        assert!(matches!(
            nudft2(&w, &[0.0], &[501.0]),
            Err(Error::Nyquist { grid: "wavenumber", value, .. }) if value == 501.0
        ));
    }

    #[test]
    fn zero_field_gives_zero_map() {
        let x = uniform_positions(0.01, 5);
        let w = Wavefield::new(vec![0.0, 1e-6, 2e-6], x, vec![0.0; 15], 0.01).unwrap();
        let map = nudft2(&w, &[1e3, 2e3], &[0.0, 10.0, 20.0]).unwrap();
        assert!(map.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn jittered_positions_keep_the_peak() {
        let l = 0.1;
        let uni = uniform_positions(l, 101);
        let jit = jittered_positions(l, 101, 0.1, 11);
        let f0 = 50e3;
        let nu0 = 200.0;
        let nu_grid = default_nu_grid(l, 490.0, 4.0);
        let f_grid = [25e3, f0, 75e3];
        let mu = nudft2(&plane_wave(f0, nu0, &uni, 40, 1e-6), &f_grid, &nu_grid).unwrap();
        let mj = nudft2(&plane_wave(f0, nu0, &jit, 40, 1e-6), &f_grid, &nu_grid).unwrap();
        assert_eq!(mu.argmax(), mj.argmax());
        let (i, j) = mu.argmax();
        assert_eq!(i, 1);
        assert!((nu_grid[j] - nu0).abs() < 1e-9);
        let ratio = mj.get(i, j).norm() / mu.get(i, j).norm();
        assert!((ratio - 1.0).abs() < 0.05);
    }

    #[test]
    fn two_peaks_ordered_by_magnitude() {
        let mut row = vec![0.0; 400];
        for (j, v) in row.iter_mut().enumerate() {
            let g = |c: f64, a: f64| a * (-(j as f64 - c).powi(2) / 8.0).exp();
            *v = g(100.0, 1.0) + g(300.0, 10.0);
        }
        let ps = peak_search(&map_row(&row), &PeakSearchConfig::default());
        assert_eq!(ps.len(), 2);
        assert!((ps.peaks[0].nu - 300.0).abs() < 1e-6);
        assert!((ps.peaks[1].nu - 100.0).abs() < 1e-6);
        assert!(ps.peaks[0].magnitude > 9.9 * ps.peaks[1].magnitude);
    }

    #[test]
    fn close_peaks_merge() {
        let mut row = vec![0.0; 50];
        for (j, v) in row.iter_mut().enumerate() {
            let g = |c: f64, a: f64| a * (-(j as f64 - c).powi(2) / 0.5).exp();
            *v = g(20.0, 1.0) + g(22.0, 0.8);
        }
        let ps = peak_search(&map_row(&row), &PeakSearchConfig::default());
        assert_eq!(ps.len(), 1);
        assert_eq!(ps.peaks[0].nu.round(), 20.0);
    }

    #[test]
    fn flat_row_has_no_peaks() {
        assert!(peak_search(&map_row(&[1.0; 30]), &PeakSearchConfig::default()).is_empty());
        assert!(peak_search(&map_row(&[0.0; 30]), &PeakSearchConfig::default()).is_empty());
    }

    #[test]
    fn parabola_exact_on_gaussian() {
        // a Gaussian is a parabola in log magnitude
        let row: Vec<f64> = (0..40)
            .map(|j| (-(j as f64 - 17.3).powi(2) / 6.0).exp())
            .collect();
        let p = peak_search(&map_row(&row), &PeakSearchConfig::default()).peaks[0];
        assert!(p.refined);
        assert!((p.nu - 17.3).abs() < 1e-9);
        assert!((p.magnitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lfk1_round_trip() {
        let x = uniform_positions(0.01, 11);
        let w = plane_wave(40e3, 300.0, &x, 50, 1e-6);
        let map = nudft2(&w, &[20e3, 40e3], &[0.0, 100.0, 300.0]).unwrap();
        let mut buf = Vec::new();
        map.write_bin(&mut buf).unwrap();
        assert_eq!(FKMap::read_bin(buf.as_slice()).unwrap(), map);
        buf.pop();
        assert!(FKMap::read_bin(buf.as_slice()).is_err());
    }

    #[test]
    fn peak_csv_round_trip() {
        let ps = PeakSet {
            peaks: vec![Peak {
                f: 1e5,
                nu: 123.456,
                magnitude: 7.5,
                prominence: 0.25,
                refined: true,
            }],
        };
        let mut buf = Vec::new();
        ps.write_csv(&mut buf).unwrap();
        assert_eq!(PeakSet::read_csv(buf.as_slice()).unwrap(), ps);
        let bad = "f_hz,nu_1pm,mag\n1,2,3\n";
        assert!(matches!(
            PeakSet::read_csv(bad.as_bytes()),
            Err(Error::MissingColumn(c)) if c == "prom"
        ));
    }
}

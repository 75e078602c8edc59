//! Multi-frequency excitation signals and synthetic line-scan wavefields.

mod io;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::global_matrix::{DispersionBranch, ModeLabel};
use crate::interp::Pchip;

pub use io::{load_wavefield, read_wavefield, save_wavefield, write_wavefield, WavefieldFormat};

/// Relative slack when testing whether a tone sits on an FFT bin or inside a
/// frequency interval.
const GRID_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hanning,
    None,
}

/// Frequency comb design. Run `r` excites
/// `f_min + r * run_shift + j * df_within_run` for every `j` with the tone
/// not above `f_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub df_within_run: f64,
    pub run_shift: f64,
    pub n_runs: usize,
    /// Record length, s.
    pub duration: f64,
    #[serde(default)]
    pub window: Window,
    /// Samples per second.
    pub sample_rate: f64,
    /// Seeds the per-tone start phases.
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        Self::comb_250hz()
    }
}

impl ExcitationSpec {
    /// 0.25 kHz to 1 MHz in 20 shifted runs of 5 kHz combs, 80 ms records.
    pub fn comb_250hz() -> Self {
        Self {
            f_min: 250.0,
            f_max: 1.0e6,
            df_within_run: 5.0e3,
            run_shift: 250.0,
            n_runs: 20,
            duration: 0.08,
            window: Window::Hanning,
            sample_rate: 3.125e6,
            seed: 0,
        }
    }

    /// 1 kHz to 0.5 MHz in 5 shifted runs of 5 kHz combs, 125 ms records.
    pub fn comb_1khz() -> Self {
        Self {
            f_min: 1.0e3,
            f_max: 0.5e6,
            df_within_run: 5.0e3,
            run_shift: 1.0e3,
            n_runs: 5,
            duration: 0.125,
            window: Window::Hanning,
            sample_rate: 3.125e6,
            seed: 0,
        }
    }

    /// Single tone, one run.
    pub fn single_tone(f: f64, duration: f64, sample_rate: f64) -> Self {
        Self {
            f_min: f,
            f_max: f,
            df_within_run: f.max(1.0),
            run_shift: f.max(1.0),
            n_runs: 1,
            duration,
            window: Window::None,
            sample_rate,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "excitation {name} must be positive, got {v}"
                )))
            }
        };
        positive("f_min", self.f_min)?;
        positive("f_max", self.f_max)?;
        positive("df_within_run", self.df_within_run)?;
        positive("run_shift", self.run_shift)?;
        positive("duration", self.duration)?;
        positive("sample_rate", self.sample_rate)?;
        if self.n_runs == 0 {
            return Err(Error::Config("excitation needs at least one run".into()));
        }
        if self.f_max >= 0.5 * self.sample_rate {
            return Err(Error::Nyquist {
                grid: "excitation frequency",
                value: self.f_max,
                limit: 0.5 * self.sample_rate,
            });
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_samples()).map(|n| n as f64 * dt).collect()
    }

    /// Tones of one run, ascending.
    pub fn comb(&self, run: usize) -> Result<Vec<f64>> {
        if run >= self.n_runs {
            return Err(Error::RunIndex {
                index: run,
                n_runs: self.n_runs,
            });
        }
        let start = self.f_min + run as f64 * self.run_shift;
        let limit = self.f_max * (1.0 + GRID_RTOL);
        let tones: Vec<f64> = (0..)
            .map(|j| start + j as f64 * self.df_within_run)
            .take_while(|&f| f <= limit)
            .collect();
        if tones.is_empty() {
            return Err(Error::EmptyComb {
                f_min: self.f_min,
                f_max: self.f_max,
            });
        }
        Ok(tones)
    }

    /// Union of all runs, ascending, each tone paired with its run index.
    pub fn all_tones(&self) -> Result<Vec<(f64, usize)>> {
        let mut tones = Vec::new();
        for run in 0..self.n_runs {
            match self.comb(run) {
                Ok(c) => tones.extend(c.into_iter().map(|f| (f, run))),
                Err(Error::EmptyComb { .. }) if run > 0 => {}
                Err(e) => return Err(e),
            }
        }
        tones.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(tones)
    }

    /// Whether `f * duration` is an integer, so the tone sits on an FFT bin.
    pub fn is_bin_centered(&self, f: f64) -> bool {
        let cycles = f * self.n_samples() as f64 * self.dt();
        (cycles - cycles.round()).abs() <= GRID_RTOL * cycles.max(1.0)
    }

    /// Start phase of every tone in [`Self::all_tones`] order.
    pub fn phases(&self) -> Result<Vec<f64>> {
        let tones = self.all_tones()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok(tones
            .iter()
            .map(|_| rng.random::<f64>() * 2.0 * PI)
            .collect())
    }
}

/// Drive signal for one run: equal-amplitude sinusoids with seeded phases,
/// windowed over the whole record and scaled to unit peak.
pub fn make_excitation(spec: &ExcitationSpec, run: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let comb = spec.comb(run)?;
    let all = spec.all_tones()?;
    let phases = spec.phases()?;
    let tones: Vec<(f64, Complex64)> = all
        .iter()
        .zip(&phases)
        .filter(|((_, r), _)| *r == run)
        .map(|(&(f, _), &phi)| (f, Complex64::from_polar(1.0, phi - 0.5 * PI)))
        .collect();
    debug_assert_eq!(tones.len(), comb.len());
    let synth = ToneSynth::new(spec.n_samples(), spec.dt(), tones.iter().map(|t| t.0))?;
    let amps: Vec<Complex64> = tones.iter().map(|t| t.1).collect();
    let mut x = synth.sum(&amps);
    if spec.window == Window::Hanning {
        let n = x.len();
        let denom = (n.max(2) - 1) as f64;
        for (i, v) in x.iter_mut().enumerate() {
            *v *= 0.5 * (1.0 - (2.0 * PI * i as f64 / denom).cos());
        }
    }
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(x)
}

/// Evaluates `Re sum_j c_j exp(i 2 pi f_j t_n)` on `t_n = n dt`, through one
/// inverse FFT when every tone sits on a bin and by direct summation
/// otherwise.
struct ToneSynth {
    n: usize,
    dt: f64,
    freqs: Vec<f64>,
    bins: Option<(Vec<usize>, Arc<dyn Fft<f64>>)>,
}

impl ToneSynth {
    fn new(n: usize, dt: f64, freqs: impl Iterator<Item = f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("record has no samples".into()));
        }
        let freqs: Vec<f64> = freqs.collect();
        let span = n as f64 * dt;
        let bins: Option<Vec<usize>> = freqs
            .iter()
            .map(|&f| {
                let b = f * span;
                let r = b.round();
                ((b - r).abs() <= GRID_RTOL * b.abs().max(1.0) && r >= 0.0 && (r as usize) < n)
                    .then_some(r as usize)
            })
            .collect();
        let bins = bins.map(|b| (b, FftPlanner::new().plan_fft_inverse(n)));
        Ok(Self { n, dt, freqs, bins })
    }

    fn sum(&self, amps: &[Complex64]) -> Vec<f64> {
        match &self.bins {
            Some((bins, fft)) => {
                let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
                for (&b, &c) in bins.iter().zip(amps) {
                    buf[b] += c;
                }
                fft.process(&mut buf);
                buf.into_iter().map(|z| z.re).collect()
            }
            None => {
                let mut out = vec![0.0; self.n];
                for (&f, &c) in self.freqs.iter().zip(amps) {
                    if c == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let w = 2.0 * PI * f * self.dt;
                    for (i, o) in out.iter_mut().enumerate() {
                        let (s, co) = (w * i as f64).sin_cos();
                        *o += c.re * co - c.im * s;
                    }
                }
                out
            }
        }
    }
}

/// Out-of-plane velocity samples on a line: `data[it * n_positions + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefield {
    times: Vec<f64>,
    positions: Vec<f64>,
    data: Vec<f64>,
    /// Measurement path length, m.
    pub path_length: f64,
    /// Free-form `key=value` annotations carried through the file formats.
    pub meta: BTreeMap<String, String>,
}

impl Wavefield {
    pub fn new(
        times: Vec<f64>,
        positions: Vec<f64>,
        data: Vec<f64>,
        path_length: f64,
    ) -> Result<Self> {
        if times.is_empty() || positions.is_empty() {
            return Err(Error::InvalidWavefield(
                "empty time or position grid".into(),
            ));
        }
        if data.len() != times.len() * positions.len() {
            return Err(Error::InvalidWavefield(format!(
                "{} samples do not fill a {}x{} grid",
                data.len(),
                times.len(),
                positions.len()
            )));
        }
        if times.len() > 1 {
            let dt = times[1] - times[0];
            if !(dt > 0.0) {
                return Err(Error::InvalidWavefield(
                    "time grid is not increasing".into(),
                ));
            }
            let t0 = times[0];
            let scale = t0.abs().max(dt * times.len() as f64);
            for (n, &t) in times.iter().enumerate() {
                if (t - (t0 + n as f64 * dt)).abs() > 1e-12 * scale {
                    return Err(Error::InvalidWavefield(format!(
                        "time grid not uniform at sample {n}"
                    )));
                }
            }
        }
        if positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidWavefield(
                "positions must be strictly increasing".into(),
            ));
        }
        if times.iter().chain(&positions).any(|v| !v.is_finite()) {
            return Err(Error::InvalidWavefield("non-finite grid value".into()));
        }
        if !(path_length > 0.0 && path_length.is_finite()) {
            return Err(Error::InvalidWavefield(format!(
                "path length must be positive, got {path_length}"
            )));
        }
        Ok(Self {
            times,
            positions,
            data,
            path_length,
            meta: BTreeMap::new(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_positions(&self) -> usize {
        self.positions.len()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt()
    }

    /// Smallest gap between neighbouring positions.
    pub fn min_spacing(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn get(&self, it: usize, ix: usize) -> f64 {
        self.data[it * self.positions.len() + ix]
    }

    /// Time series at one position.
    pub fn trace(&self, ix: usize) -> Vec<f64> {
        let nx = self.positions.len();
        self.data.iter().skip(ix).step_by(nx).copied().collect()
    }

    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }
}

/// Additive noise on a synthetic wavefield.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    #[default]
    None,
    /// Absolute standard deviation, m/s.
    Rms(f64),
    /// Signal-to-noise power ratio relative to the noiseless field, dB.
    SnrDb(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisOptions {
    /// Out-of-plane amplitude per mode, m/s. Modes not listed are silent.
    pub amplitudes: BTreeMap<ModeLabel, f64>,
    pub noise: Noise,
    /// Strength of a mirror source behind the far end of the path.
    pub reflection_coeff: f64,
    /// Path length, m. Positions must lie in `[0, path_length]`.
    pub path_length: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            amplitudes: BTreeMap::from([(ModeLabel::A0, 1.0), (ModeLabel::S0, 0.1)]),
            noise: Noise::None,
            reflection_coeff: 0.0,
            path_length: 0.32,
        }
    }
}

/// `n` equally spaced positions from 0 to `length` inclusive.
pub fn uniform_positions(length: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| length * i as f64 / (n - 1) as f64).collect()
}

/// Uniform positions displaced by up to `jitter * spacing`, ordering kept.
pub fn jittered_positions(length: f64, n: usize, jitter: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = uniform_positions(length, n);
    let h = if n > 1 { length / (n - 1) as f64 } else { 0.0 };
    base.into_iter()
        .enumerate()
        .map(|(i, x)| {
            let dx = (2.0 * rng.random::<f64>() - 1.0) * jitter * h;
            if i == 0 || i + 1 == n {
                x
            } else {
                x + dx
            }
        })
        .collect()
}

/// Steady-state superposition of every excited tone and every listed mode,
/// plus an optional mirror wave and Gaussian noise. All runs of `spec` are
/// placed in one record of length `spec.duration`.
pub fn synthesize(
    branches: &[DispersionBranch],
    spec: &ExcitationSpec,
    positions: &[f64],
    opts: &SynthesisOptions,
) -> Result<Wavefield> {
    spec.validate()?;
    let length = opts.path_length;
    if positions.iter().any(|&x| !(0.0..=length).contains(&x)) {
        return Err(Error::Domain(format!(
            "positions must lie within the {length} m path"
        )));
    }
    let tones = spec.all_tones()?;
    let phases = spec.phases()?;

    let modes: Vec<(f64, Pchip)> = branches
        .iter()
        .filter_map(|b| {
            let a = opts.amplitudes.get(&b.label).copied().unwrap_or(0.0);
            (a != 0.0).then_some((a, b))
        })
        .map(|(a, b)| {
            let f = b.frequencies();
            let nu = b.points.iter().map(|p| p.nu()).collect();
            Pchip::new(f, nu).map(|p| (a, p))
        })
        .collect::<Result<_>>()?;

    // (tone index, amplitude, nu) for every mode present at each tone
    let mut components = Vec::new();
    for (i, &(f, _)) in tones.iter().enumerate() {
        let mut covered = false;
        for (a, p) in &modes {
            if let Some(nu) = p.eval(within(f, p.domain())) {
                components.push((i, *a, nu));
                covered = true;
            }
        }
        if !covered {
            return Err(Error::BandCoverage { f_hz: f });
        }
    }

    let synth = ToneSynth::new(spec.n_samples(), spec.dt(), tones.iter().map(|t| t.0))?;
    let r = opts.reflection_coeff;
    let columns: Vec<Vec<f64>> = positions
        .par_iter()
        .map(|&x| {
            let mut amps = vec![Complex64::new(0.0, 0.0); tones.len()];
            for &(i, a, nu) in &components {
                amps[i] += Complex64::from_polar(a, phases[i] - 2.0 * PI * nu * x);
                if r != 0.0 {
                    amps[i] += Complex64::from_polar(
                        r * a,
                        phases[i] - 2.0 * PI * nu * (2.0 * length - x),
                    );
                }
            }
            synth.sum(&amps)
        })
        .collect();

    let nt = spec.n_samples();
    let nx = positions.len();
    let mut data = vec![0.0; nt * nx];
    for (ix, col) in columns.iter().enumerate() {
        for (it, v) in col.iter().enumerate() {
            data[it * nx + ix] = *v;
        }
    }

    let sigma = match opts.noise {
        Noise::None => 0.0,
        Noise::Rms(s) => s,
        Noise::SnrDb(db) => {
            let p = data.iter().map(|v| v * v).sum::<f64>() / data.len() as f64;
            (p / 10f64.powf(db / 10.0)).sqrt()
        }
    };
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::Config(format!("noise level {sigma}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        data.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }

    let mut w = Wavefield::new(spec.times(), positions.to_vec(), data, length)?;
    w.meta.insert("runs".into(), spec.n_runs.to_string());
    w.meta.insert("tones".into(), tones.len().to_string());
    w.meta.insert("f_min_hz".into(), spec.f_min.to_string());
    w.meta.insert("f_max_hz".into(), spec.f_max.to_string());
    w.meta
        .insert("df_within_run_hz".into(), spec.df_within_run.to_string());
    w.meta
        .insert("run_shift_hz".into(), spec.run_shift.to_string());
    w.meta.insert("seed".into(), spec.seed.to_string());
    w.meta.insert("noise_rms".into(), sigma.to_string());
    w.meta.insert("reflection_coeff".into(), r.to_string());
    Ok(w)
}

/// Snaps `f` onto an interval end when it misses only by rounding.
fn within(f: f64, (lo, hi): (f64, f64)) -> f64 {
    let tol = GRID_RTOL * hi.abs();
    if f < lo && lo - f <= tol {
        lo
    } else if f > hi && f - hi <= tol {
        hi
    } else {
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::global_matrix::BranchPoint;

    fn line_branch(label: ModeLabel, c: f64, f_lo: f64, f_hi: f64) -> DispersionBranch {
        let pts = (0..=100)
            .map(|i| {
                let f = f_lo + (f_hi - f_lo) * i as f64 / 100.0;
                BranchPoint::new(f, 2.0 * PI * f / c)
            })
            .collect();
        DispersionBranch::new(label, pts, [0.0, 0.0, 1.0]).unwrap()
    }

    fn dft_mag(x: &[f64], f: f64, dt: f64) -> f64 {
        let mut z = Complex64::new(0.0, 0.0);
        for (n, v) in x.iter().enumerate() {
            z += Complex64::from_polar(*v, 2.0 * PI * f * n as f64 * dt);
        }
        z.norm()
    }

    #[test]
    fn comb_250hz_layout() {
        let s = ExcitationSpec::comb_250hz();
        let c0 = s.comb(0).unwrap();
        assert_eq!(c0.len(), 200);
        assert_eq!(c0[0], 250.0);
        assert!((c0[199] - 995_250.0).abs() < 1e-6);
        let all = s.all_tones().unwrap();
        assert_eq!(all.len(), 4000);
        for w in all.windows(2) {
            assert!((w[1].0 - w[0].0 - 250.0).abs() < 1e-6);
        }
        assert!((all[3999].0 - 1.0e6).abs() < 1e-6);
        assert!(all.iter().all(|&(f, _)| s.is_bin_centered(f)));
    }

    #[test]
    fn comb_1khz_tones_are_bin_centered() {
        let s = ExcitationSpec::comb_1khz();
        let all = s.all_tones().unwrap();
        assert_eq!(all.len(), 500);
        for &(f, _) in &all {
            let cycles = f * s.duration;
            assert!((cycles - cycles.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn run_index_and_empty_comb() {
        let s = ExcitationSpec::comb_250hz();
        assert!(matches!(s.comb(20), Err(Error::RunIndex { index: 20, .. })));
        let empty = ExcitationSpec {
            f_min: 2e6,
            f_max: 1e6,
            ..ExcitationSpec::comb_250hz()
        };
        assert!(matches!(empty.comb(0), Err(Error::EmptyComb { .. })));
    }

    #[test]
    fn single_tone_is_pure_sinusoid() {
        let s = ExcitationSpec::single_tone(10e3, 1e-3, 1e6);
        let x = make_excitation(&s, 0).unwrap();
        assert_eq!(x.len(), 1000);
        let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 1e-12);
        let phi = s.phases().unwrap()[0];
        let pure: Vec<f64> = (0..1000)
            .map(|n| (2.0 * PI * 10e3 * n as f64 * 1e-6 + phi).sin())
            .collect();
        let scale = pure.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (v, p) in x.iter().zip(&pure) {
            assert!((v - p / scale).abs() < 1e-12);
        }
        let spec_at = |f: f64| dft_mag(&x, f, 1e-6);
        let m0 = spec_at(10e3);
        for k in [-2.0, -1.0, 1.0, 2.0] {
            assert!(spec_at(10e3 + k * 1e3) < 1e-6 * m0);
        }
    }

    #[test]
    fn hanning_comb_rejects_mid_gap() {
        // T * df = 25
        let s = ExcitationSpec {
            f_min: 20e3,
            f_max: 60e3,
            df_within_run: 10e3,
            run_shift: 10e3,
            n_runs: 1,
            duration: 2.5e-3,
            window: Window::Hanning,
            sample_rate: 1e6,
            seed: 3,
        };
        let x = make_excitation(&s, 0).unwrap();
        let m = |f: f64| dft_mag(&x, f, 1e-6);
        let tone = m(40e3);
        assert!(tone > m(40e3 - 400.0) && tone > m(40e3 + 400.0));
        for mid in [25e3, 35e3, 45e3, 55e3] {
            let db = 20.0 * (tone / m(mid)).log10();
            assert!(db >= 40.0, "{mid}: {db} dB");
        }
    }

    #[test]
    fn synthesis_plane_wave() {
        let b = line_branch(ModeLabel::A0, 1000.0, 0.0, 100e3);
        let s = ExcitationSpec::single_tone(20e3, 1e-3, 1e6);
        let x = uniform_positions(0.1, 11);
        let opts = SynthesisOptions {
            path_length: 0.1,
            ..Default::default()
        };
        let w = synthesize(&[b], &s, &x, &opts).unwrap();
        let phi = s.phases().unwrap()[0];
        for it in [0, 17, 999] {
            for (ix, &xx) in x.iter().enumerate() {
                let t = it as f64 * 1e-6;
                let v = (2.0 * PI * (20e3 * t - 20.0 * xx) + phi).cos();
                assert!((w.get(it, ix) - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn synthesis_is_linear_in_branch_sets() {
        let a = line_branch(ModeLabel::A0, 1200.0, 0.0, 200e3);
        let s0 = line_branch(ModeLabel::S0, 5000.0, 0.0, 200e3);
        let spec = ExcitationSpec {
            f_min: 10e3,
            f_max: 100e3,
            df_within_run: 30e3,
            run_shift: 10e3,
            n_runs: 3,
            duration: 1e-3,
            window: Window::Hanning,
            sample_rate: 1e6,
            seed: 9,
        };
        let x = jittered_positions(0.2, 21, 0.1, 4);
        let opts = SynthesisOptions {
            path_length: 0.2,
            ..Default::default()
        };
        let both = synthesize(&[a.clone(), s0.clone()], &spec, &x, &opts).unwrap();
        let wa = synthesize(&[a], &spec, &x, &opts).unwrap();
        let ws = synthesize(&[s0], &spec, &x, &opts).unwrap();
        for i in 0..both.data().len() {
            let sum = wa.data()[i] + ws.data()[i];
            assert!((both.data()[i] - sum).abs() < 1e-9);
        }
        assert_eq!(both.meta["runs"], "3");
    }

    #[test]
    fn band_coverage_error() {
        let b = line_branch(ModeLabel::A0, 1000.0, 50e3, 100e3);
        let s = ExcitationSpec::single_tone(20e3, 1e-3, 1e6);
        let opts = SynthesisOptions {
            path_length: 0.1,
            ..Default::default()
        };
        let err = synthesize(&[b], &s, &[0.0, 0.05], &opts).unwrap_err();
        assert!(matches!(err, Error::BandCoverage { f_hz } if f_hz == 20e3));
    }

    #[test]
    fn noise_follows_snr() {
        let b = line_branch(ModeLabel::A0, 1000.0, 0.0, 100e3);
        let s = ExcitationSpec::single_tone(20e3, 2e-3, 1e6);
        let x = uniform_positions(0.1, 51);
        let clean = synthesize(
            std::slice::from_ref(&b),
            &s,
            &x,
            &SynthesisOptions {
                path_length: 0.1,
                ..Default::default()
            },
        )
        .unwrap();
        let noisy = synthesize(
            &[b],
            &s,
            &x,
            &SynthesisOptions {
                path_length: 0.1,
                noise: Noise::SnrDb(20.0),
                ..Default::default()
            },
        )
        .unwrap();
        let diff: f64 = clean
            .data()
            .iter()
            .zip(noisy.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / clean.data().len() as f64;
        let ratio = clean.rms().powi(2) / diff;
        assert!((10.0 * ratio.log10() - 20.0).abs() < 0.2);
    }

    #[test]
    fn wavefield_validation() {
        assert!(Wavefield::new(vec![0.0, 1.0], vec![0.0], vec![0.0; 2], 1.0).is_ok());
        assert!(Wavefield::new(vec![0.0, 1.0, 2.5], vec![0.0], vec![0.0; 3], 1.0).is_err());
        assert!(Wavefield::new(vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0; 4], 1.0).is_err());
        assert!(Wavefield::new(vec![0.0, 1.0], vec![0.0], vec![0.0; 3], 1.0).is_err());
    }
}

//! Global matrix of a layered plate and its characteristic function.
//!
//! Unknowns are the six partial-wave amplitudes of every layer, ordered from
//! the top layer down. The rows are the traction-free conditions at the upper
//! surface, six continuity conditions (displacements and tractions) per
//! interface and the traction-free conditions at the lower surface. Every
//! layer uses a local thickness coordinate in `[0, h]`.

mod branch;
mod sweep;

pub use branch::{
    phase_velocity, read_branches_csv, write_branches_csv, BranchPoint, DispersionBranch,
    ModeClass, ModeLabel,
};
pub use sweep::{classify, dispersion_sweep, find_roots, Root, SweepConfig, SweepResult};

use nalgebra::{DMatrix, Matrix6};
use num_complex::Complex64;

use crate::christoffel::{partial_waves, LayerSolution, PartialWaves};
use crate::error::{Error, Result};
use crate::linalg::{BandLu, BandMatrix};
use crate::materials::{ElasticityTensor, Laminate};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const BAND: usize = 8;

/// Result of evaluating the characteristic function at one `(f, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicEvaluation {
    pub f: f64,
    pub k: f64,
    /// `ln |det|` of the global matrix; `-inf` at an exact root.
    pub log_abs_det: f64,
    /// `ln |det / prod alpha|` over the `+` root of every partial-wave pair.
    /// Free of the spurious zeros at layer bulk speeds; used for root search.
    pub log_abs_reduced: f64,
    pub phase: f64,
    pub condition_hint: f64,
}

/// Displacements at the outer surfaces for a null vector of the global matrix.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceMotion {
    pub top: [Complex64; 3],
    pub bottom: [Complex64; 3],
}

/// A laminate prepared for repeated evaluation: stiffnesses rotated into the
/// propagation frame, and layers sharing a (material, angle) pair mapped onto
/// one entry so their partial waves are solved once per phase velocity.
#[derive(Debug, Clone)]
pub struct LaminateModel {
    tensors: Vec<(ElasticityTensor, f64)>,
    /// Per layer, bottom to top: (unique tensor index, thickness in m).
    layers: Vec<(usize, f64)>,
    thickness_m: f64,
    symmetric: bool,
    bulk_speeds: Vec<f64>,
}

impl LaminateModel {
    pub fn new(laminate: &Laminate) -> Self {
        let mut keys: Vec<(usize, f64)> = Vec::new();
        let mut tensors = Vec::new();
        let mut layers = Vec::with_capacity(laminate.len());
        for (i, l) in laminate.layers().iter().enumerate() {
            let key = (l.material, l.theta_deg);
            let idx = match keys.iter().position(|k| *k == key) {
                Some(idx) => idx,
                None => {
                    keys.push(key);
                    tensors.push((
                        laminate.layer_stiffness(i),
                        laminate.material_of(i).density(),
                    ));
                    tensors.len() - 1
                }
            };
            layers.push((idx, l.thickness_mm * 1e-3));
        }
        let bulk_speeds = tensors
            .iter()
            .flat_map(|(t, rho)| bulk_speeds(t, *rho))
            .collect();
        Self {
            tensors,
            layers,
            thickness_m: laminate.total_thickness_m(),
            symmetric: laminate.is_symmetric(),
            bulk_speeds,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn thickness_m(&self) -> f64 {
        self.thickness_m
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Phase velocities at which some layer has a grazing partial wave.
    /// The plain determinant vanishes there whether or not a guided mode
    /// exists.
    pub fn bulk_speeds(&self) -> &[f64] {
        &self.bulk_speeds
    }

    fn check(f: f64, k: f64) -> Result<()> {
        if f > 0.0 && k > 0.0 && f.is_finite() && k.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "global matrix needs f > 0 and k > 0 (got f = {f}, k = {k})"
            )))
        }
    }

    /// Solves every layer at `(f, k)`, bottom to top.
    pub fn layer_solutions(&self, f: f64, k: f64) -> Result<Vec<LayerSolution>> {
        Self::check(f, k)?;
        let c = TWO_PI * f / k;
        let waves: Vec<PartialWaves> = self
            .tensors
            .iter()
            .map(|(t, rho)| partial_waves(t, *rho, c, f, k))
            .collect::<Result<_>>()?;
        Ok(self
            .layers
            .iter()
            .map(|&(idx, h)| waves[idx].clone().with_thickness(k, h))
            .collect())
    }

    fn assemble_with<F: FnMut(usize, usize, Complex64)>(sols: &[LayerSolution], mut put: F) {
        let n = sols.len();
        let scaled = |s: &LayerSolution, h: &[Complex64; 6]| -> Matrix6<Complex64> {
            let mut m = *s.g();
            for j in 0..6 {
                for i in 0..6 {
                    m[(i, j)] *= h[j];
                }
            }
            m
        };
        // Column block b holds layer n - 1 - b.
        let top = &sols[n - 1];
        let gt = scaled(top, &top.h_top);
        for i in 0..3 {
            for j in 0..6 {
                put(i, j, gt[(i + 3, j)]);
            }
        }
        for b in 0..n - 1 {
            let upper = &sols[n - 1 - b];
            let lower = &sols[n - 2 - b];
            let gu = scaled(upper, &upper.h_bottom);
            let gl = scaled(lower, &lower.h_top);
            let r0 = 3 + 6 * b;
            for i in 0..6 {
                for j in 0..6 {
                    put(r0 + i, 6 * b + j, gu[(i, j)]);
                    put(r0 + i, 6 * (b + 1) + j, -gl[(i, j)]);
                }
            }
        }
        let bottom = &sols[0];
        let gb = scaled(bottom, &bottom.h_bottom);
        let r0 = 6 * n - 3;
        for i in 0..3 {
            for j in 0..6 {
                put(r0 + i, 6 * (n - 1) + j, gb[(i + 3, j)]);
            }
        }
    }

    /// Dense global matrix, mainly for inspection and tests.
    pub fn assemble(&self, f: f64, k: f64) -> Result<DMatrix<Complex64>> {
        let sols = self.layer_solutions(f, k)?;
        let n = 6 * sols.len();
        let mut m = DMatrix::zeros(n, n);
        Self::assemble_with(&sols, |i, j, v| m[(i, j)] = v);
        Ok(m)
    }

    fn band(sols: &[LayerSolution]) -> BandMatrix {
        let mut m = BandMatrix::zeros(6 * sols.len(), BAND, BAND);
        Self::assemble_with(sols, |i, j, v| m.set(i, j, v));
        m
    }

    fn factor(&self, f: f64, k: f64) -> Result<(Vec<LayerSolution>, BandLu)> {
        let sols = self.layer_solutions(f, k)?;
        let lu = Self::band(&sols).factor();
        Ok((sols, lu))
    }

    pub fn characteristic(&self, f: f64, k: f64) -> Result<CharacteristicEvaluation> {
        let (sols, lu) = self.factor(f, k)?;
        let log_abs_det = lu.log_abs_det();
        // Each +/- pair contributes a factor alpha that vanishes at grazing
        // incidence whether or not a guided mode exists.
        let grazing: f64 = sols
            .iter()
            .flat_map(|s| [0, 2, 4].map(|j| s.alphas()[j].norm().ln()))
            .sum();
        let log_abs_reduced = if grazing.is_finite() {
            log_abs_det - grazing
        } else {
            f64::NAN
        };
        Ok(CharacteristicEvaluation {
            f,
            k,
            log_abs_det,
            log_abs_reduced,
            phase: lu.phase(),
            condition_hint: lu.condition_hint(),
        })
    }

    /// Surface displacements of the approximate null vector at a root.
    ///
    /// One solve against a generic right-hand side gives the right singular
    /// direction up to `sigma_min / sigma_2`. Repeating the solve would drift
    /// towards the smallest eigenvector instead, which differs from the null
    /// vector when the left and right null vectors are nearly orthogonal.
    pub fn surface_motion(&self, f: f64, k: f64) -> Result<SurfaceMotion> {
        let (sols, lu) = self.factor(f, k)?;
        let n = 6 * sols.len();
        let b: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 + 0.37 * (i as f64).sin(), 0.21 * (i as f64).cos()))
            .collect();
        let mut x = lu.solve_equilibrated(&b);
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::EigenSolve {
                f_hz: f,
                k_radpm: k,
                reason: "null-vector solve produced a non-finite vector".into(),
            });
        }
        x.iter_mut().for_each(|z| *z /= norm);
        let nl = sols.len();
        let displacement = |s: &LayerSolution, h: &[Complex64; 6], a: &[Complex64]| {
            let mut u = [Complex64::new(0.0, 0.0); 3];
            for (i, ui) in u.iter_mut().enumerate() {
                for j in 0..6 {
                    *ui += s.g()[(i, j)] * h[j] * a[j];
                }
            }
            u
        };
        let top = displacement(&sols[nl - 1], &sols[nl - 1].h_top, &x[0..6]);
        let bottom = displacement(&sols[0], &sols[0].h_bottom, &x[n - 6..n]);
        Ok(SurfaceMotion { top, bottom })
    }
}

/// Speeds `c` with `rho c^2` an eigenvalue of `C_i1k1`.
fn bulk_speeds(t: &ElasticityTensor, rho: f64) -> Vec<f64> {
    let mut q = nalgebra::Matrix3::zeros();
    for i in 0..3 {
        for k in 0..3 {
            q[(i, k)] = t.cijkl(i, 0, k, 0) * 1e9;
        }
    }
    q.symmetric_eigenvalues()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|v| (v / rho).sqrt())
        .collect()
}

/// Dense global matrix of `laminate` at `(f, k)`; size `6N x 6N`.
pub fn assemble_global(laminate: &Laminate, f: f64, k: f64) -> Result<DMatrix<Complex64>> {
    LaminateModel::new(laminate).assemble(f, k)
}

/// Row-equilibrated LU evaluation of the global determinant.
pub fn characteristic(laminate: &Laminate, f: f64, k: f64) -> Result<CharacteristicEvaluation> {
    LaminateModel::new(laminate).characteristic(f, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{default_fml, MaterialRecord};

    fn steel_plate(d_mm: f64) -> Laminate {
        Laminate::single(MaterialRecord::steel_1_4310(), d_mm).unwrap()
    }

    #[test]
    fn fml_matrix_is_96_square() {
        let m = assemble_global(&default_fml(), 100e3, 300.0).unwrap();
        assert_eq!(m.shape(), (96, 96));
    }

    #[test]
    fn band_and_dense_determinants_agree() {
        let lam = default_fml();
        let model = LaminateModel::new(&lam);
        for (f, k) in [(50e3, 400.0), (400e3, 900.0), (900e3, 3000.0)] {
            let dense = model.assemble(f, k).unwrap();
            // Equilibrate the dense copy by hand before taking the determinant.
            let mut log_scale = 0.0;
            let mut eq = dense.clone();
            for i in 0..eq.nrows() {
                let m = eq.row(i).iter().fold(0.0f64, |a, z| a.max(z.norm()));
                log_scale += m.ln();
                eq.row_mut(i).iter_mut().for_each(|z| *z /= m);
            }
            let lu = eq.lu();
            let u = lu.u();
            let want: f64 = (0..u.nrows()).map(|i| u[(i, i)].norm().ln()).sum::<f64>() + log_scale;
            let got = model.characteristic(f, k).unwrap().log_abs_det;
            assert!(
                (got - want).abs() < 1e-8 * want.abs().max(1.0),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn finite_far_above_branches_at_large_fd() {
        let lam = steel_plate(2.04);
        // f d = 2 MHz mm and c = 100 m/s: every partial wave is evanescent.
        let f = 2.0e6 / 2.04;
        let k = TWO_PI * f / 100.0;
        let e = characteristic(&lam, f, k).unwrap();
        assert!(e.log_abs_det.is_finite());
        assert!(e.phase.is_finite() && e.condition_hint.is_finite());
        let e = characteristic(&default_fml(), f, k).unwrap();
        assert!(e.log_abs_det.is_finite());
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        let lam = steel_plate(1.0);
        assert!(characteristic(&lam, 0.0, 10.0).is_err());
        assert!(characteristic(&lam, 1e5, -1.0).is_err());
    }

    #[test]
    fn bulk_speeds_of_steel() {
        let model = LaminateModel::new(&steel_plate(1.0));
        let mut v = model.bulk_speeds().to_vec();
        v.sort_by(f64::total_cmp);
        assert_eq!(v.len(), 3);
        assert!((v[0] - 3049.4).abs() < 1.0, "{v:?}");
        assert!((v[1] - v[0]).abs() < 1e-6 * v[0]);
        assert!((v[2] - 5704.8).abs() < 1.0, "{v:?}");
    }
}

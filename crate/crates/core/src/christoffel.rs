//! Partial-wave solution of a single homogeneous layer.
//!
//! For a trial phase velocity `c = omega / k` the displacement ansatz
//! `u = p exp(i k (x1 + alpha x3) - i omega t)` turns the equation of motion
//! into the quadratic eigenproblem
//!
//! ```text
//! (Q + alpha R + alpha^2 T) p = 0,   Q = C_i1k1 - rho c^2 I,
//!                                    R = C_i1k3 + C_i3k1,
//!                                    T = C_i3k3,
//! ```
//!
//! solved through its 6x6 companion linearization with state `(p, alpha p)`.
//! Every root yields a polarization `p` and stress factor
//! `d_i = C_i3kl n_l p_k` with `n = (1, 0, alpha)`, so that
//! `sigma_i3 / (i k) = d_i` per unit amplitude.
//!
//! Roots are split into a `+` set (decaying towards +x3, or propagating
//! upwards when real) and a `-` set, each ordered by `|alpha|`, and stored as
//! `(alpha1+, alpha1-, alpha2+, alpha2-, alpha3+, alpha3-)`.

use nalgebra::{Matrix3, Matrix6, Schur, Vector3, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::materials::ElasticityTensor;

const GPA: f64 = 1e9;
/// Relative split below which two roots count as one degenerate root.
const DEGENERATE_RTOL: f64 = 1e-10;
/// Singular value ratio below which `Q + alpha R + alpha^2 T` is treated as
/// having a two-dimensional null space.
const RANK_DEFICIENT_RTOL: f64 = 1e-7;
/// Imaginary parts below this (relative) are treated as round-off.
const REAL_RTOL: f64 = 1e-8;
const GRAZING_ALPHA2: f64 = 64.0 * f64::EPSILON;

/// Depth-independent partial waves of one material at one phase velocity.
#[derive(Debug, Clone)]
pub struct PartialWaves {
    pub alphas: [Complex64; 6],
    pub polarizations: [Vector3<Complex64>; 6],
    pub stress_factors: [Vector3<Complex64>; 6],
    /// Columns are partial waves; rows are `u1, u2, u3, s13*, s23*, s33*`.
    pub g: Matrix6<Complex64>,
}

/// Partial waves of a layer plus the through-thickness phase terms.
#[derive(Debug, Clone)]
pub struct LayerSolution {
    pub waves: PartialWaves,
    /// `exp(i k alpha_j h)` for every partial wave.
    pub phase: [Complex64; 6],
    /// Diagonal of the propagator evaluated at the upper layer surface.
    pub h_top: [Complex64; 6],
    /// Diagonal of the propagator evaluated at the lower layer surface.
    pub h_bottom: [Complex64; 6],
}

impl LayerSolution {
    pub fn alphas(&self) -> &[Complex64; 6] {
        &self.waves.alphas
    }

    pub fn g(&self) -> &Matrix6<Complex64> {
        &self.waves.g
    }
}

/// Whether the partial wave in column `j` belongs to the `+` set.
#[inline]
pub fn is_upgoing(j: usize) -> bool {
    j.is_multiple_of(2)
}

/// Contracts `d_i = C_i3kl n_l p_k` over the full fourth-order tensor.
/// The result carries the tensor's units (GPa for a raw [`ElasticityTensor`]).
pub fn stress_factor(
    t: &ElasticityTensor,
    n: &Vector3<Complex64>,
    p: &Vector3<Complex64>,
) -> Vector3<Complex64> {
    let mut d = Vector3::zeros();
    for i in 0..3 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..3 {
            for l in 0..3 {
                let c = t.cijkl(i, 2, k, l);
                if c != 0.0 {
                    acc += c * n[l] * p[k];
                }
            }
        }
        d[i] = acc;
    }
    d
}

/// The three coefficient matrices of the quadratic eigenproblem in GPa.
fn quadratic_blocks(t: &ElasticityTensor) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let mut q = Matrix3::zeros();
    let mut r = Matrix3::zeros();
    let mut tt = Matrix3::zeros();
    for i in 0..3 {
        for k in 0..3 {
            q[(i, k)] = t.cijkl(i, 0, k, 0);
            r[(i, k)] = t.cijkl(i, 0, k, 2) + t.cijkl(i, 2, k, 0);
            tt[(i, k)] = t.cijkl(i, 2, k, 2);
        }
    }
    (q, r, tt)
}

/// `Gamma(alpha) - rho c^2 I` in GPa.
pub fn christoffel_matrix(
    t: &ElasticityTensor,
    rho_c2_gpa: f64,
    alpha: Complex64,
) -> Matrix3<Complex64> {
    let (q, r, tt) = quadratic_blocks(t);
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for k in 0..3 {
            m[(i, k)] = q[(i, k)] + alpha * r[(i, k)] + alpha * alpha * tt[(i, k)];
        }
        m[(i, i)] -= rho_c2_gpa;
    }
    m
}

fn fix_phase(mut p: Vector3<Complex64>) -> Vector3<Complex64> {
    let norm = p.norm();
    p /= Complex64::new(norm, 0.0);
    let (imax, _) = p.iter().enumerate().fold((0, -1.0), |(bi, bv), (i, z)| {
        // Prefer earlier components on near ties so the choice is stable.
        if z.norm() > bv * (1.0 + 1e-9) {
            (i, z.norm())
        } else {
            (bi, bv)
        }
    });
    let z = p[imax];
    let rot = z.conj() / z.norm();
    p * rot
}

/// Orthonormal basis of the (approximate) null space of `m`, dimension 1 or 2.
fn null_space(m: &Matrix3<Complex64>) -> Option<Vec<Vector3<Complex64>>> {
    let svd = SVD::try_new(*m, false, true, 1e-15, 500)?;
    let v_t = svd.v_t?;
    let s = svd.singular_values;
    let row = |i: usize| -> Vector3<Complex64> {
        Vector3::new(v_t[(i, 0)].conj(), v_t[(i, 1)].conj(), v_t[(i, 2)].conj())
    };
    if s[0] == 0.0 {
        return Some(
            vec![Vector3::x(), Vector3::y(), Vector3::z()]
                .into_iter()
                .map(|v| v.map(|x: f64| Complex64::new(x, 0.0)))
                .collect(),
        );
    }
    if s[1] <= RANK_DEFICIENT_RTOL * s[0] {
        Some(vec![row(1), row(2)])
    } else {
        Some(vec![row(2)])
    }
}

/// Picks reproducible orthonormal polarizations inside a degenerate null
/// space by projecting the fixed frame `e2, e1, e3` onto it.
fn degenerate_polarizations(basis: &[Vector3<Complex64>]) -> [Vector3<Complex64>; 2] {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let frame = [
        Vector3::new(zero, one, zero),
        Vector3::new(one, zero, zero),
        Vector3::new(zero, zero, one),
    ];
    let project = |e: &Vector3<Complex64>, against: &[Vector3<Complex64>]| {
        let mut q = Vector3::zeros();
        for b in basis {
            q += b * b.dotc(e);
        }
        for a in against {
            q -= a * a.dotc(&q);
        }
        q
    };
    let mut chosen: Vec<Vector3<Complex64>> = Vec::with_capacity(2);
    for e in &frame {
        if chosen.len() == 2 {
            break;
        }
        let q = project(e, &chosen);
        if q.norm() > 1e-6 {
            chosen.push(q / Complex64::new(q.norm(), 0.0));
        }
    }
    [fix_phase(chosen[0]), fix_phase(chosen[1])]
}

fn is_plus(alpha: Complex64) -> bool {
    let tol = REAL_RTOL * alpha.norm().max(1.0);
    if alpha.im > tol {
        true
    } else if alpha.im < -tol {
        false
    } else {
        alpha.re > 0.0
    }
}

/// Solves the partial waves of a material at phase velocity `c_mps`.
///
/// `(f_hz, k_radpm)` are only used for error context.
pub fn partial_waves(
    t: &ElasticityTensor,
    density: f64,
    c_mps: f64,
    f_hz: f64,
    k_radpm: f64,
) -> Result<PartialWaves> {
    let fail = |reason: String| Error::EigenSolve {
        f_hz,
        k_radpm,
        reason,
    };
    if !(c_mps > 0.0 && c_mps.is_finite()) {
        return Err(fail(format!("phase velocity {c_mps} is not positive")));
    }
    let rho_c2 = density * c_mps * c_mps / GPA;
    let (mut q, r, tt) = quadratic_blocks(t);
    for i in 0..3 {
        q[(i, i)] -= rho_c2;
    }
    let t_inv = tt
        .try_inverse()
        .ok_or_else(|| fail("C_i3k3 block is singular".into()))?;
    let a = -t_inv * q;
    let b = -t_inv * r;
    let mut companion = Matrix6::<f64>::zeros();
    for i in 0..3 {
        companion[(i, i + 3)] = 1.0;
        for j in 0..3 {
            companion[(i + 3, j)] = a[(i, j)];
            companion[(i + 3, j + 3)] = b[(i, j)];
        }
    }
    let schur = Schur::try_new(companion, 1e-15, 2000)
        .ok_or_else(|| fail("companion eigen-solve did not converge".into()))?;
    let mut eig = schur.complex_eigenvalues();
    // A grazing root is a defective double root of the companion problem and
    // only resolves to sqrt(eps); below that alpha^2 is pure round-off.
    for z in eig.iter_mut() {
        if z.norm_sqr() < GRAZING_ALPHA2 {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(fail("non-finite Christoffel root".into()));
    }

    let mut plus: Vec<Complex64> = Vec::with_capacity(3);
    let mut minus: Vec<Complex64> = Vec::with_capacity(3);
    for z in eig.iter() {
        if is_plus(*z) {
            plus.push(*z);
        } else {
            minus.push(*z);
        }
    }
    if plus.len() != 3 {
        // Exactly grazing roots: fall back to a total order on (Im, Re).
        let mut all: Vec<Complex64> = eig.iter().copied().collect();
        all.sort_by(|x, y| {
            y.im.partial_cmp(&x.im)
                .unwrap()
                .then(y.re.partial_cmp(&x.re).unwrap())
        });
        plus = all[..3].to_vec();
        minus = all[3..].to_vec();
    }

    let t_pa = t.scaled(GPA);
    let group_solution =
        |roots: &mut Vec<Complex64>| -> Result<Vec<(Complex64, Vector3<Complex64>)>> {
            roots.sort_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap());
            let mut out = Vec::with_capacity(3);
            let mut i = 0;
            while i < roots.len() {
                let alpha = roots[i];
                let scale = alpha.norm().max(1.0);
                let partner = (i + 1 < roots.len())
                    .then(|| roots[i + 1])
                    .filter(|z| (z - alpha).norm() <= DEGENERATE_RTOL * scale);
                let m = christoffel_matrix(t, rho_c2, alpha);
                let ns = null_space(&m).ok_or_else(|| fail("null-space SVD failed".into()))?;
                let next_close = (i + 1 < roots.len()) && ns.len() >= 2;
                if let Some(z) = partner.or(next_close.then(|| roots[i + 1])) {
                    let mean = 0.5 * (alpha + z);
                    let m = christoffel_matrix(t, rho_c2, mean);
                    let ns = null_space(&m).ok_or_else(|| fail("null-space SVD failed".into()))?;
                    if ns.len() < 2 {
                        return Err(fail("degenerate root without a 2-D null space".into()));
                    }
                    let [p1, p2] = degenerate_polarizations(&ns);
                    out.push((mean, p1));
                    out.push((mean, p2));
                    i += 2;
                } else {
                    out.push((alpha, fix_phase(ns[ns.len() - 1])));
                    i += 1;
                }
            }
            Ok(out)
        };
    let plus = group_solution(&mut plus)?;
    let minus = group_solution(&mut minus)?;

    let zero = Complex64::new(0.0, 0.0);
    let mut alphas = [zero; 6];
    let mut polarizations = [Vector3::zeros(); 6];
    let mut stress_factors = [Vector3::zeros(); 6];
    let mut g = Matrix6::zeros();
    for n in 0..3 {
        for (slot, (alpha, p)) in [(2 * n, plus[n]), (2 * n + 1, minus[n])] {
            let dir = Vector3::new(Complex64::new(1.0, 0.0), zero, alpha);
            let d = stress_factor(&t_pa, &dir, &p);
            alphas[slot] = alpha;
            polarizations[slot] = p;
            stress_factors[slot] = d;
            for row in 0..3 {
                g[(row, slot)] = p[row];
                g[(row + 3, slot)] = d[row];
            }
        }
    }
    Ok(PartialWaves {
        alphas,
        polarizations,
        stress_factors,
        g,
    })
}

impl PartialWaves {
    /// Attaches through-thickness phase terms for wavenumber `k` and layer
    /// thickness `h` (m). `+` waves are referenced to the lower surface and
    /// `-` waves to the upper one, so no exponential ever exceeds unit size.
    pub fn with_thickness(self, k_radpm: f64, h_m: f64) -> LayerSolution {
        let one = Complex64::new(1.0, 0.0);
        let mut phase = [one; 6];
        let mut h_top = [one; 6];
        let mut h_bottom = [one; 6];
        for j in 0..6 {
            let e = (Complex64::i() * k_radpm * h_m * self.alphas[j]).exp();
            phase[j] = e;
            if is_upgoing(j) {
                h_top[j] = e;
            } else {
                h_bottom[j] = (-Complex64::i() * k_radpm * h_m * self.alphas[j]).exp();
            }
        }
        LayerSolution {
            waves: self,
            phase,
            h_top,
            h_bottom,
        }
    }
}

/// Solves one layer at `(f, k)`: Christoffel roots, polarizations, stress
/// factors, the 6x6 field matrix and the thickness phase terms.
pub fn solve_layer(
    t: &ElasticityTensor,
    density: f64,
    f_hz: f64,
    k_radpm: f64,
    h_m: f64,
) -> Result<LayerSolution> {
    if !(f_hz > 0.0 && k_radpm > 0.0 && h_m > 0.0) {
        return Err(Error::Domain(format!(
            "solve_layer needs f, k, h > 0 (got f = {f_hz}, k = {k_radpm}, h = {h_m})"
        )));
    }
    let c = 2.0 * std::f64::consts::PI * f_hz / k_radpm;
    Ok(partial_waves(t, density, c, f_hz, k_radpm)?.with_thickness(k_radpm, h_m))
}

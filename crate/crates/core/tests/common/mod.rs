//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;

/// Steel plate used by the scalar oracle.
pub const STEEL_E: f64 = 191e9;
pub const STEEL_NU: f64 = 0.3;
pub const STEEL_RHO: f64 = 7900.0;
pub const STEEL_D_MM: f64 = 2.04;

pub fn steel_speeds() -> (f64, f64) {
    let (e, nu, rho) = (STEEL_E, STEEL_NU, STEEL_RHO);
    let c_l = (e * (1.0 - nu) / (rho * (1.0 + nu) * (1.0 - 2.0 * nu))).sqrt();
    let c_t = (e / (2.0 * rho * (1.0 + nu))).sqrt();
    (c_l, c_t)
}

/// `(cos(s h), sin(s h) / s)` for `s = sqrt(s2)`, continued to `s2 <= 0`.
/// The hyperbolic pair is scaled by `exp(-|s| h)`; every term of the
/// frequency equation holds one such pair, so signs are unaffected.
fn cs(s2: f64, h: f64) -> (f64, f64) {
    if s2 > 0.0 {
        let s = s2.sqrt();
        ((s * h).cos(), (s * h).sin() / s)
    } else if s2 < 0.0 {
        let s = (-s2).sqrt();
        let e = (-2.0 * s * h).exp();
        (0.5 * (1.0 + e), 0.5 * (1.0 - e) / s)
    } else {
        (1.0, h)
    }
}

/// Real form of the Rayleigh-Lamb frequency equation at phase velocity `c`.
/// `h` is the half thickness in m.
pub fn rayleigh_lamb(c: f64, f: f64, h: f64, c_l: f64, c_t: f64, symmetric: bool) -> f64 {
    let w = 2.0 * PI * f;
    let k = w / c;
    let k2 = k * k;
    let p2 = (w / c_l).powi(2) - k2;
    let q2 = (w / c_t).powi(2) - k2;
    let (cp, sp) = cs(p2, h);
    let (cq, sq) = cs(q2, h);
    let a = (q2 - k2).powi(2);
    let v = if symmetric {
        a * cp * sq + 4.0 * k2 * p2 * sp * cq
    } else {
        a * sp * cq + 4.0 * k2 * q2 * cp * sq
    };
    v / (k2 * k2)
}

/// Slowest root of the symmetric or antisymmetric equation, m/s.
pub fn fundamental_velocity(f: f64, d_mm: f64, symmetric: bool) -> Option<f64> {
    let (c_l, c_t) = steel_speeds();
    let h = 0.5 * d_mm * 1e-3;
    let g = |c: f64| rayleigh_lamb(c, f, h, c_l, c_t, symmetric);
    let step = 0.25;
    let mut a = 50.0;
    let mut ga = g(a);
    while a < 1.2 * c_l {
        let b = a + step;
        let gb = g(b);
        if ga == 0.0 {
            return Some(a);
        }
        if ga.signum() != gb.signum() {
            let (mut lo, mut hi, mut glo) = (a, b, ga);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let gm = g(mid);
                if gm.signum() == glo.signum() {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-12 * hi {
                    break;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        a = b;
        ga = gb;
    }
    None
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Writes straight to the process stderr so the line shows up even when the
/// harness captures test output.
pub fn report(line: &str) {
    let mut e = std::io::stderr().lock();
    let _ = writeln!(e, "{line}");
}

pub fn verdict(id: u32, title: &str, pass: bool, detail: &str) {
    report(&format!(
        "ACCEPTANCE {id} {} {title}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    ));
}

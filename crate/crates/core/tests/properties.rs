//! Randomized invariants across modules.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use lamwave_core::compare::compare;
use lamwave_core::fk_transform::{nudft2, Peak};
use lamwave_core::global_matrix::{BranchPoint, DispersionBranch, ModeLabel};
use lamwave_core::interp::Pchip;
use lamwave_core::materials::{rotate_in_plane, stiffness_from_engineering, MaterialRecord};
use lamwave_core::outlier_filter::{filter, FilterConfig};
use lamwave_core::wavefield::{jittered_positions, Wavefield};

fn field(data: Vec<f64>, nt: usize, x: Vec<f64>) -> Wavefield {
    let times = (0..nt).map(|i| i as f64 * 1e-6).collect();
    Wavefield::new(times, x, data, 0.01).unwrap()
}

fn rel_max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
        / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotations_compose(a in -180.0..180.0f64, b in -180.0..180.0f64) {
        let t = stiffness_from_engineering(&MaterialRecord::cfrp_8552_as4_johnston()).unwrap();
        let two = rotate_in_plane(&rotate_in_plane(&t, a), b);
        let one = rotate_in_plane(&t, a + b);
        prop_assert!((two.matrix() - one.matrix()).amax() < 1e-9 * t.matrix().amax());
        let back = rotate_in_plane(&rotate_in_plane(&t, a), -a);
        prop_assert!((back.matrix() - t.matrix()).amax() < 1e-9 * t.matrix().amax());
    }

    #[test]
    fn pchip_stays_within_monotone_data(steps in prop::collection::vec((0.01..1.0f64, 0.0..5.0f64), 3..20), u in 0.0..1.0f64) {
        let mut x = vec![0.0];
        let mut y = vec![0.0];
        for (dx, dy) in steps {
            x.push(x[x.len() - 1] + dx);
            y.push(y[y.len() - 1] + dy);
        }
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        let xi = u * x[x.len() - 1];
        let v = p.eval(xi).unwrap();
        let j = x.partition_point(|&t| t <= xi).clamp(1, x.len() - 1);
        prop_assert!(v >= y[j - 1] - 1e-9 && v <= y[j] + 1e-9);
    }

    #[test]
    fn transform_is_linear(seed in 0u64..1000, alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
        let (nt, nx) = (24, 15);
        let x = jittered_positions(0.01, nx, 0.3, seed);
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a: Vec<f64> = (0..nt * nx).map(|_| next()).collect();
        let b: Vec<f64> = (0..nt * nx).map(|_| next()).collect();
        let c: Vec<f64> = a.iter().zip(&b).map(|(p, q)| alpha * p + beta * q).collect();
        let fg: Vec<f64> = (0..9).map(|i| 1.3e4 * i as f64).collect();
        let ng: Vec<f64> = (0..12).map(|j| 35.0 * j as f64).collect();
        let fa = nudft2(&field(a, nt, x.clone()), &fg, &ng).unwrap();
        let fb = nudft2(&field(b, nt, x.clone()), &fg, &ng).unwrap();
        let fc = nudft2(&field(c, nt, x), &fg, &ng).unwrap();
        let combo: Vec<Complex64> = fa.data.iter().zip(&fb.data).map(|(p, q)| p * alpha + q * beta).collect();
        prop_assert!(rel_max_diff(&fc.data, &combo) < 1e-9);
    }

    #[test]
    fn shift_multiplies_by_a_phase(seed in 0u64..1000, x0 in -0.05..0.05f64) {
        let (nt, nx) = (16, 11);
        let x = jittered_positions(0.01, nx, 0.3, seed);
        let data: Vec<f64> = (0..nt * nx).map(|i| ((i as u64 ^ seed) % 17) as f64 - 8.0).collect();
        let fg = [0.0, 5e4, 1.2e5];
        let ng: Vec<f64> = (0..10).map(|j| 40.0 * j as f64).collect();
        let base = nudft2(&field(data.clone(), nt, x.clone()), &fg, &ng).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| v + x0).collect();
        let shifted = nudft2(&field(data, nt, moved), &fg, &ng).unwrap();
        let expect: Vec<Complex64> = base
            .data
            .iter()
            .enumerate()
            .map(|(i, z)| z * Complex64::from_polar(1.0, -2.0 * PI * ng[i % ng.len()] * x0))
            .collect();
        prop_assert!(rel_max_diff(&shifted.data, &expect) < 1e-9);
    }

    #[test]
    fn compare_recovers_a_uniform_offset(eps in -0.05..0.05f64, n in 5usize..40) {
        let r: Vec<(f64, f64)> = (0..n).map(|i| (0.05 * i as f64, 2000.0 + 30.0 * i as f64)).collect();
        let t: Vec<(f64, f64)> = r.iter().map(|&(x, c)| (x, c * (1.0 + eps))).collect();
        let rep = compare(&r, &t, "A0").unwrap();
        prop_assert_eq!(rep.rows.len(), n);
        prop_assert!((rep.summary.mean_abs - eps.abs()).abs() < 1e-12);
    }
}

fn line(label: ModeLabel, a: f64, b: f64) -> DispersionBranch {
    let pts = (1..=100)
        .map(|i| {
            let f = i as f64 * 1e4;
            BranchPoint::new(f, 2.0 * PI * (a + b * f))
        })
        .collect();
    DispersionBranch::new(label, pts, [0.0; 3]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn filter_monotone_and_idempotent(
        devs in prop::collection::vec(-0.06..0.06f64, 60),
        t1 in 0.005..0.05f64,
        t2 in 0.005..0.05f64,
    ) {
        let refs = [line(ModeLabel::A0, 40.0, 4e-4)];
        let peaks: Vec<Peak> = devs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let f = 1e5 + i as f64 * 1e4;
                // Most points near the line, every fourth one spread widely.
                let d = if i % 4 == 0 { *d } else { d / 10.0 };
                Peak { f, nu: (40.0 + 4e-4 * f) * (1.0 + d), magnitude: 1.0, prominence: 1.0, refined: true }
            })
            .collect();
        let cfg = |t: f64| FilterConfig { exclusion_zones: Vec::new(), residual_threshold_rel: t, ..Default::default() };
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let keys = |t: f64| {
            let mut k: Vec<u64> = filter(&peaks, &refs, &cfg(t)).unwrap().kept.iter().map(|p| p.peak.f.to_bits()).collect();
            k.sort();
            k
        };
        let (kl, kh) = (keys(lo), keys(hi));
        prop_assert!(kl.iter().all(|k| kh.binary_search(k).is_ok()));

        let first = filter(&peaks, &refs, &cfg(lo)).unwrap();
        let again: Vec<Peak> = first.kept.iter().map(|p| p.peak).collect();
        let second = filter(&again, &refs, &cfg(lo)).unwrap();
        prop_assert!(second.rejected.is_empty());
    }
}

//! Weighted cubic smoothing spline (Reinsch form) with the smoothing
//! parameter chosen by generalized cross-validation.

/// Weights below this fraction of the mean are clamped, which leaves such
/// points practically unconstrained without dividing by zero.
const MIN_WEIGHT_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    /// Fitted values at the abscissae.
    pub values: Vec<f64>,
    /// Smoothing parameter in units of the rescaled problem (x on [0, 1],
    /// y divided by its mean magnitude).
    pub lambda: f64,
    pub gcv: f64,
    /// Trace of the hat matrix.
    pub edf: f64,
}

/// Minimises `sum w_i (y_i - g(x_i))^2 + lambda * int g''^2` over cubic
/// splines with knots at `x`, which must be strictly increasing. `lambda`
/// minimises the GCV score.
pub fn smoothing_spline(x: &[f64], y: &[f64], w: &[f64]) -> SplineFit {
    let n = x.len();
    assert!(n == y.len() && n == w.len(), "length mismatch");
    if n < 3 {
        return SplineFit {
            values: y.to_vec(),
            lambda: 0.0,
            gcv: 0.0,
            edf: n as f64,
        };
    }
    let span = x[n - 1] - x[0];
    let u: Vec<f64> = x.iter().map(|v| (v - x[0]) / span).collect();
    let scale = (y.iter().map(|v| v.abs()).sum::<f64>() / n as f64).max(f64::MIN_POSITIVE);
    let ys: Vec<f64> = y.iter().map(|v| v / scale).collect();
    let wmean = w.iter().sum::<f64>() / n as f64;
    let ws: Vec<f64> = w.iter().map(|v| (v / wmean).max(MIN_WEIGHT_REL)).collect();
    let sys = System::new(&u, &ws, &ys);

    // coarse scan in log10(lambda), then golden section around the best
    let grid: Vec<f64> = (0..=44).map(|i| -16.0 + 0.5 * i as f64).collect();
    let scores: Vec<f64> = grid.iter().map(|&l| sys.solve(10f64.powf(l)).gcv).collect();
    let best = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let (mut a, mut b) = (
        grid[best.saturating_sub(1)],
        grid[(best + 1).min(grid.len() - 1)],
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = sys.solve(10f64.powf(c)).gcv;
    let mut fd = sys.solve(10f64.powf(d)).gcv;
    for _ in 0..40 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sys.solve(10f64.powf(c)).gcv;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sys.solve(10f64.powf(d)).gcv;
        }
    }
    let mut l = 0.5 * (a + b);
    if scores[best] < sys.solve(10f64.powf(l)).gcv {
        l = grid[best];
    }
    let lambda = 10f64.powf(l);
    let sol = sys.solve(lambda);
    SplineFit {
        values: sol.values.iter().map(|v| v * scale).collect(),
        lambda,
        gcv: sol.gcv,
        edf: sol.edf,
    }
}

struct System<'a> {
    w: &'a [f64],
    y: &'a [f64],
    /// Second divided differences `Q^T y`.
    qty: Vec<f64>,
    /// `Q` columns: entries at rows j, j+1, j+2.
    q: Vec<[f64; 3]>,
    /// Tridiagonal `R`: diagonal and first super-diagonal.
    r: Vec<[f64; 2]>,
    /// Pentadiagonal `Q^T W^-1 Q`: diagonal and two super-diagonals.
    m: Vec<[f64; 3]>,
}

struct Solution {
    values: Vec<f64>,
    gcv: f64,
    edf: f64,
}

impl<'a> System<'a> {
    fn new(u: &[f64], w: &'a [f64], y: &'a [f64]) -> Self {
        let n = u.len();
        let h: Vec<f64> = u.windows(2).map(|p| p[1] - p[0]).collect();
        let k = n - 2;
        let q: Vec<[f64; 3]> = (0..k)
            .map(|j| [1.0 / h[j], -1.0 / h[j] - 1.0 / h[j + 1], 1.0 / h[j + 1]])
            .collect();
        let r: Vec<[f64; 2]> = (0..k)
            .map(|j| {
                [
                    (h[j] + h[j + 1]) / 3.0,
                    if j + 1 < k { h[j + 1] / 6.0 } else { 0.0 },
                ]
            })
            .collect();
        let qty = (0..k)
            .map(|j| q[j][0] * y[j] + q[j][1] * y[j + 1] + q[j][2] * y[j + 2])
            .collect();
        // M[j][d] = sum_i Q[i, j] Q[i, j + d] / w_i
        let m = (0..k)
            .map(|j| {
                let mut row = [0.0; 3];
                for (d, slot) in row.iter_mut().enumerate() {
                    let jj = j + d;
                    if jj >= k {
                        continue;
                    }
                    for i in jj..=j + 2 {
                        *slot += q[j][i - j] * q[jj][i - jj] / w[i];
                    }
                }
                row
            })
            .collect();
        Self { w, y, qty, q, r, m }
    }

    fn solve(&self, lambda: f64) -> Solution {
        let n = self.y.len();
        let k = n - 2;
        // B = R + lambda M as band rows [diag, +1, +2]
        let b: Vec<[f64; 3]> = (0..k)
            .map(|j| {
                [
                    self.r[j][0] + lambda * self.m[j][0],
                    self.r[j][1] + lambda * self.m[j][1],
                    lambda * self.m[j][2],
                ]
            })
            .collect();
        // LDL^T with unit lower L stored as l[j] = [L(j+1, j), L(j+2, j)]
        let mut d = vec![0.0_f64; k];
        let mut l = vec![[0.0_f64; 2]; k];
        for j in 0..k {
            let mut dj = b[j][0];
            if j >= 1 {
                dj -= l[j - 1][0].powi(2) * d[j - 1];
            }
            if j >= 2 {
                dj -= l[j - 2][1].powi(2) * d[j - 2];
            }
            d[j] = dj;
            if j + 1 < k {
                let mut v = b[j][1];
                if j >= 1 {
                    v -= l[j - 1][0] * l[j - 1][1] * d[j - 1];
                }
                l[j][0] = v / dj;
            }
            if j + 2 < k {
                l[j][1] = b[j][2] / dj;
            }
        }
        // solve B gamma = Q^T y
        let mut g = self.qty.clone();
        for j in 0..k {
            if j >= 1 {
                g[j] -= l[j - 1][0] * g[j - 1];
            }
            if j >= 2 {
                g[j] -= l[j - 2][1] * g[j - 2];
            }
        }
        for j in 0..k {
            g[j] /= d[j];
        }
        for j in (0..k).rev() {
            if j + 1 < k {
                g[j] -= l[j][0] * g[j + 1];
            }
            if j + 2 < k {
                g[j] -= l[j][1] * g[j + 2];
            }
        }
        // fitted values y - lambda W^-1 Q gamma
        let mut qg = vec![0.0; n];
        for j in 0..k {
            for t in 0..3 {
                qg[j + t] += self.q[j][t] * g[j];
            }
        }
        let values: Vec<f64> = (0..n)
            .map(|i| self.y[i] - lambda * qg[i] / self.w[i])
            .collect();

        // band of B^-1 by the backward recursion on the LDL^T factors
        let mut s = vec![[0.0; 3]; k];
        for j in (0..k).rev() {
            let l1 = if j + 1 < k { l[j][0] } else { 0.0 };
            let l2 = if j + 2 < k { l[j][1] } else { 0.0 };
            let s11 = if j + 1 < k { s[j + 1][0] } else { 0.0 };
            let s12 = if j + 2 < k { s[j + 1][1] } else { 0.0 };
            let s22 = if j + 2 < k { s[j + 2][0] } else { 0.0 };
            let sj2 = -l1 * s12 - l2 * s22;
            let sj1 = -l1 * s11 - l2 * s12;
            let sj0 = 1.0 / d[j] - l1 * sj1 - l2 * sj2;
            s[j] = [sj0, sj1, sj2];
        }
        let sigma = |a: usize, c: usize| -> f64 {
            let (lo, hi) = if a <= c { (a, c) } else { (c, a) };
            if hi - lo > 2 {
                0.0
            } else {
                s[lo][hi - lo]
            }
        };
        // tr(I - A) = lambda sum_i (Q B^-1 Q^T)_ii / w_i
        let mut tr = 0.0;
        for i in 0..n {
            let cols: Vec<usize> = (i.saturating_sub(2)..=i).filter(|&j| j < k).collect();
            let mut acc = 0.0;
            for &ja in &cols {
                for &jb in &cols {
                    acc += self.q[ja][i - ja] * self.q[jb][i - jb] * sigma(ja, jb);
                }
            }
            tr += acc / self.w[i];
        }
        let resid = lambda * tr;
        let edf = n as f64 - resid;
        let rss: f64 = (0..n)
            .map(|i| self.w[i] * (self.y[i] - values[i]).powi(2))
            .sum();
        let denom = (resid / n as f64).powi(2);
        let gcv = if denom > 0.0 {
            rss / n as f64 / denom
        } else {
            f64::INFINITY
        };
        Solution { values, gcv, edf }
    }
}

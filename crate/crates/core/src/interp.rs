//! Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson).

use crate::error::{Error, Result};

/// Shape-preserving cubic interpolant through `(x_i, y_i)`. Never overshoots
/// the data between samples and never extrapolates.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Domain(format!(
                "interpolation needs equal lengths (x: {}, y: {})",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::Domain(
                "interpolation needs at least two samples".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "interpolation abscissae must be finite and strictly increasing".into(),
            ));
        }
        let d = slopes(&x, &y);
        Ok(Self { x, y, d })
    }

    /// Closed interval covered by the samples.
    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn contains(&self, x: f64) -> bool {
        let (a, b) = self.domain();
        x >= a && x <= b
    }

    /// Value at `x`, or `None` outside the sampled interval.
    pub fn eval(&self, x: f64) -> Option<f64> {
        if !self.contains(x) {
            return None;
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return Some(self.y[i]),
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1])
    }
}

fn slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a * b > 0.0 {
            // Weighted harmonic mean keeps the interpolant monotone.
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// One-sided three-point end slope, limited to preserve shape.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_at_samples() {
        let x = vec![0.0, 1.0, 2.5, 4.0];
        let y = vec![1.0, 3.0, 2.0, 7.0];
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(p.eval(*xi), Some(*yi));
        }
    }

    #[test]
    fn no_extrapolation() {
        let p = Pchip::new(vec![1.0, 2.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(p.eval(0.999), None);
        assert_eq!(p.eval(2.001), None);
        assert!((p.eval(1.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reproduces_lines() {
        let x: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        let p = Pchip::new(x, y).unwrap();
        for i in 0..=810 {
            let v = i as f64 * 0.1;
            assert!((p.eval(v).unwrap() - (3.0 * v - 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_step_does_not_overshoot() {
        let x: Vec<f64> = (0..8).map(f64::from).collect();
        let y = vec![
            6800.0, 6790.0, 6700.0, 3000.0, 2500.0, 2400.0, 2350.0, 2330.0,
        ];
        let p = Pchip::new(x, y).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=700 {
            let v = p.eval(i as f64 * 0.01).unwrap();
            assert!(v <= prev + 1e-9 && (2330.0..=6800.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Pchip::new(vec![0.0], vec![1.0]).is_err());
        assert!(Pchip::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Pchip::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }
}

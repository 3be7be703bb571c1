//! Gauss–Legendre rules and the ordered-simplex rule built from them.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    x.into_iter()
        .zip(w)
        .map(|(xi, wi)| (mid + half * xi, half * wi))
        .collect()
}

/// Iterated Gauss–Legendre rule on the ordered simplex
/// `0 <= s_n <= ... <= s_1 <= upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexQuadrature {
    pub order: usize,
    pub points: usize,
    pub upper: f64,
}

impl SimplexQuadrature {
    pub const DEFAULT_POINTS: usize = 8;

    pub fn new(order: usize, points: usize, upper: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("simplex order must be >= 1".into()));
        }
        if points == 0 {
            return Err(Error::InvalidParameter(
                "quadrature needs at least one point per axis".into(),
            ));
        }
        if !upper.is_finite() || upper < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "simplex upper bound must be finite and >= 0, got {upper}"
            )));
        }
        Ok(Self {
            order,
            points,
            upper,
        })
    }

    /// All nodes `(s_1, ..., s_n)` with their weights. `points^order` entries.
    pub fn nodes(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::with_capacity(self.points.pow(self.order as u32));
        let mut stack = Vec::with_capacity(self.order);
        self.fill(self.upper, 1.0, &mut stack, &mut out);
        out
    }

    fn fill(&self, upper: f64, weight: f64, prefix: &mut Vec<f64>, out: &mut Vec<(Vec<f64>, f64)>) {
        if prefix.len() == self.order {
            out.push((prefix.clone(), weight));
            return;
        }
        for (s, w) in gauss_legendre_interval(self.points, 0.0, upper) {
            prefix.push(s);
            self.fill(s, weight * w, prefix, out);
            prefix.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn simplex_weights_sum_to_volume() {
        for order in 1..=4 {
            let q = SimplexQuadrature::new(order, 6, 1.7).unwrap();
            let total: f64 = q.nodes().iter().map(|(_, w)| w).sum();
            let fact: f64 = (1..=order).map(|k| k as f64).product();
            let exact = 1.7f64.powi(order as i32) / fact;
            assert!((total - exact).abs() < 1e-13 * exact.max(1.0));
            assert!(q.nodes().iter().all(|(s, w)| *w > 0.0 && s.windows(2).all(|p| p[0] >= p[1])));
        }
    }

    #[test]
    fn simplex_integrates_ordered_monomial() {
        // int_{1>s1>s2>0} s1 s2 = 1/8
        let q = SimplexQuadrature::new(2, 4, 1.0).unwrap();
        let v: f64 = q.nodes().iter().map(|(s, w)| w * s[0] * s[1]).sum();
        assert!((v - 0.125).abs() < 1e-14);
    }
}

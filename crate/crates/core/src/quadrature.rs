//! Quadrature rules and extrapolation used by the transport, Dyson and
//! symbol modules.

use std::ops::{Add, Mul, Sub};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
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
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let values = legendre_all(n, x);
    let p = values[n];
    let pm1 = if n > 0 { values[n - 1] } else { 0.0 };
    let d = if n == 0 { 0.0 } else { n as f64 * (x * p - pm1) / (x * x - 1.0) };
    (p, d)
}

/// `P_0(x), …, P_n(x)`.
pub fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Spectral integration matrix on Gauss–Legendre nodes:
/// `S[i][j] = ∫_{-1}^{x_i} ℓ_j(x) dx` where `ℓ_j` is the Lagrange basis.
pub fn integration_matrix(nodes: &[f64], weights: &[f64]) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let p_at_nodes: Vec<Vec<f64>> = nodes.iter().map(|&x| legendre_all(n, x)).collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        let pi = &p_at_nodes[i];
        for j in 0..n {
            let pj = &p_at_nodes[j];
            let mut acc = 0.5 * (nodes[i] + 1.0);
            for k in 1..n {
                acc += 0.5 * pj[k] * (pi[k + 1] - pi[k - 1]);
            }
            s[i][j] = weights[j] * acc;
        }
    }
    s
}

/// Five-point Gauss–Lobatto rule on `[-1, 1]` (exact through degree 7).
pub const LOBATTO5_NODES: [f64; 5] = [-1.0, -0.654_653_670_707_977_2, 0.0, 0.654_653_670_707_977_2, 1.0];
pub const LOBATTO5_WEIGHTS: [f64; 5] = [0.1, 49.0 / 90.0, 32.0 / 45.0, 49.0 / 90.0, 0.1];

/// Richardson table for a sequence whose error expands in powers
/// `h^{p_1}, h^{p_2}, …` with `h` shrinking by `ratio` between entries.
/// Returns the most extrapolated value and the difference to the previous
/// diagonal entry as an error estimate.
pub fn richardson<T>(values: &[T], ratio: f64, powers: &[f64]) -> (T, f64)
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> + Norm,
{
    assert!(!values.is_empty());
    let mut table: Vec<Vec<T>> = vec![values.to_vec()];
    for (level, &p) in powers.iter().enumerate() {
        let prev = &table[level];
        if prev.len() < 2 {
            break;
        }
        let factor = 1.0 / (ratio.powf(p) - 1.0);
        let next: Vec<T> = prev.windows(2).map(|w| w[1] + (w[1] - w[0]) * factor).collect();
        table.push(next);
    }
    let last = table.last().unwrap();
    let best = *last.last().unwrap();
    let err = if table.len() >= 2 {
        let prev = &table[table.len() - 2];
        (best - *prev.last().unwrap()).norm_value()
    } else if last.len() >= 2 {
        (best - last[last.len() - 2]).norm_value()
    } else {
        f64::INFINITY
    };
    (best, err)
}

/// Least-squares line through `(ln x, ln y)`; returns `(slope, intercept)`.
pub fn log_log_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub trait Norm {
    fn norm_value(&self) -> f64;
}

impl Norm for f64 {
    fn norm_value(&self) -> f64 {
        self.abs()
    }
}

impl Norm for num_complex::Complex64 {
    fn norm_value(&self) -> f64 {
        self.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((integral - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn integration_matrix_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s = integration_matrix(&x, &w);
        for i in 0..x.len() {
            let approx: f64 = (0..x.len()).map(|j| s[i][j] * 3.0 * x[j] * x[j]).sum();
            let exact = x[i].powi(3) + 1.0;
            assert!((approx - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn lobatto_is_exact_to_degree_seven() {
        let v: f64 = LOBATTO5_NODES.iter().zip(LOBATTO5_WEIGHTS).map(|(x, w)| w * x.powi(6)).sum();
        assert!((v - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn log_log_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [0.1f64, 0.2, 0.4].iter().map(|&x| (x, 5.0 * x.powf(2.5))).collect();
        let (slope, icpt) = log_log_fit(&pts);
        assert!((slope - 2.5).abs() < 1e-12);
        assert!((icpt.exp() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn richardson_removes_leading_terms() {
        let f = |h: f64| 1.0 + 0.3 * h + 0.2 * h * h - 0.1 * h.powi(3);
        let vals: Vec<f64> = [1.0, 0.5, 0.25, 0.125].iter().map(|&h| f(h)).collect();
        let (best, _) = richardson(&vals, 2.0, &[1.0, 2.0, 3.0]);
        assert!((best - 1.0).abs() < 1e-13);
    }
}

//! Least-squares fits used by the scaling studies.

use serde::{Deserialize, Serialize};

use crate::matrix_core::solve_real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub coeffs: Vec<f64>,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares of `y` on the given basis functions of `x`.
pub fn least_squares(x: &[f64], y: &[f64], basis: &[&dyn Fn(f64) -> f64]) -> Option<Fit> {
    let p = basis.len();
    if x.len() != y.len() || x.len() < p || p == 0 {
        return None;
    }
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| basis.iter().map(|b| b(v)).collect()).collect();
    let mut normal = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (r, &yv) in rows.iter().zip(y) {
        for i in 0..p {
            rhs[i] += r[i] * yv;
            for j in 0..p {
                normal[i][j] += r[i] * r[j];
            }
        }
    }
    let coeffs = solve_real(&normal, &rhs).ok()?;
    let pred: Vec<f64> = rows.iter().map(|r| r.iter().zip(&coeffs).map(|(a, c)| a * c).sum()).collect();
    let residuals: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    Some(Fit { coeffs, r_squared, residuals })
}

/// `y ≈ a + b·x`.
pub fn linear(x: &[f64], y: &[f64]) -> Option<Fit> {
    least_squares(x, y, &[&|_| 1.0, &|v| v])
}

/// `y ≈ a + b·ln n + c·ln² n`.
pub fn log_quadratic(n: &[f64], y: &[f64]) -> Option<Fit> {
    least_squares(n, y, &[&|_| 1.0, &|v: f64| v.ln(), &|v: f64| v.ln().powi(2)])
}

/// `y ≈ a + b·ln n`.
pub fn log_linear(n: &[f64], y: &[f64]) -> Option<Fit> {
    least_squares(n, y, &[&|_| 1.0, &|v: f64| v.ln()])
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<Fit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_models() {
        let n: Vec<f64> = (4..=12).map(|k| 2f64.powi(k)).collect();
        let y: Vec<f64> = n.iter().map(|v| 3.0 + 2.0 * v.ln() + 0.5 * v.ln().powi(2)).collect();
        let f = log_quadratic(&n, &y).unwrap();
        assert!((f.coeffs[2] - 0.5).abs() < 1e-8 && f.r_squared > 1.0 - 1e-12);

        let y: Vec<f64> = n.iter().map(|v| 7.0 * v.powf(1.5)).collect();
        let f = loglog_slope(&n, &y).unwrap();
        assert!((f.coeffs[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let f = linear(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert!(f.coeffs[1].abs() < 1e-12 && f.r_squared == 1.0);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(linear(&[1.0], &[2.0]).is_none());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_none());
    }
}

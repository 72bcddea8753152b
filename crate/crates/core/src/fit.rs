//! Small least-squares fits.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Result of a linear least-squares fit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LsqFit {
    /// Coefficients in the order of the basis functions.
    pub coef: Vec<f64>,
    /// Coefficient of determination; 1 for an exact fit, NaN for constant data.
    pub r2: f64,
}

/// Least squares `y ~ sum_j coef_j * basis_j(x)` via modified Gram–Schmidt.
/// Returns `None` when the design is rank deficient.
pub fn least_squares(xs: &[f64], ys: &[f64], basis: &[&dyn Fn(f64) -> f64]) -> Option<LsqFit> {
    let m = xs.len();
    let p = basis.len();
    if m < p || m != ys.len() || p == 0 {
        return None;
    }
    let mut q: Vec<Vec<f64>> = basis.iter().map(|b| xs.iter().map(|&x| b(x)).collect()).collect();
    let mut r = alloc::vec![alloc::vec![0.0; p]; p];
    for j in 0..p {
        for i in 0..j {
            let d: f64 = q[i].iter().zip(q[j].iter()).map(|(a, b)| a * b).sum();
            r[i][j] = d;
            let qi = q[i].clone();
            for (v, u) in q[j].iter_mut().zip(qi.iter()) {
                *v -= d * u;
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = q[j].iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        if norm <= 1e-13 * scale * (m as f64).sqrt() {
            return None;
        }
        r[j][j] = norm;
        for v in q[j].iter_mut() {
            *v /= norm;
        }
    }
    let qty: Vec<f64> = q.iter().map(|col| col.iter().zip(ys).map(|(a, b)| a * b).sum()).collect();
    let mut coef = alloc::vec![0.0; p];
    for j in (0..p).rev() {
        let mut s = qty[j];
        for k in j + 1..p {
            s -= r[j][k] * coef[k];
        }
        coef[j] = s / r[j][j];
    }
    let mean = ys.iter().sum::<f64>() / m as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let pred: f64 = basis.iter().zip(&coef).map(|(b, c)| c * b(x)).sum();
            (y - pred) * (y - pred)
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };
    Some(LsqFit { coef, r2 })
}

/// Straight line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let one = |_x: f64| 1.0;
    let id = |x: f64| x;
    let f = least_squares(xs, ys, &[&one, &id])?;
    Some(LineFit { intercept: f.coef[0], slope: f.coef[1], r2: f.r2 })
}

/// Consecutive finite-difference slopes `(y_{i+1}-y_i)/(x_{i+1}-x_i)`.
pub fn local_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_basis_fit() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x + 3.0 * x * x).collect();
        let b0 = |_x: f64| 1.0;
        let b1 = |x: f64| x;
        let b2 = |x: f64| x * x;
        let f = least_squares(&xs, &ys, &[&b0, &b1, &b2]).unwrap();
        for (c, e) in f.coef.iter().zip([1.0, 2.0, 3.0]) {
            assert!((c - e).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        assert!(fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
    }
}

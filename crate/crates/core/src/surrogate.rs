//! Interpolating radial-basis-function surrogate with a cubic kernel and a
//! linear polynomial tail, over level-coded core configurations.
//!
//! Fitting solves the augmented system
//!
//! ```text
//! [ Phi  P ] [w]   [y]
//! [ P^T  0 ] [c] = [0]
//! ```
//!
//! with `Phi_ij = |x_i - x_j|^3` and `P_i = [1, x_i]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    pub centers: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Constant term followed by the three linear coefficients.
    pub poly: [f64; 4],
}

fn kernel(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    r2 * r2.sqrt()
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() <= 1e-10 * scale {
            return Err(Error::Singular(format!("zero pivot in column {col}")));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Fits an interpolant through `samples`; needs at least four points that
/// are not coplanar.
pub fn fit_rbf(samples: &[([f64; 3], f64)]) -> Result<RbfModel> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::Singular(format!("{n} samples, at least 4 needed")));
    }
    if samples.iter().any(|(x, y)| !y.is_finite() || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::domain("non-finite sample"));
    }
    let size = n + 4;
    let mut a = vec![vec![0.0; size]; size];
    let mut b = vec![0.0; size];
    for (i, (xi, yi)) in samples.iter().enumerate() {
        for (j, (xj, _)) in samples.iter().enumerate() {
            a[i][j] = kernel(xi, xj);
        }
        let tail = [1.0, xi[0], xi[1], xi[2]];
        for (k, t) in tail.iter().enumerate() {
            a[i][n + k] = *t;
            a[n + k][i] = *t;
        }
        b[i] = *yi;
    }
    let x = solve(a, b)?;
    Ok(RbfModel {
        centers: samples.iter().map(|s| s.0).collect(),
        weights: x[..n].to_vec(),
        poly: [x[n], x[n + 1], x[n + 2], x[n + 3]],
    })
}

impl RbfModel {
    pub fn predict(&self, x: &[f64; 3]) -> f64 {
        let radial: f64 = self.centers.iter().zip(&self.weights).map(|(c, w)| w * kernel(x, c)).sum();
        radial + self.poly[0] + self.poly[1] * x[0] + self.poly[2] * x[1] + self.poly[3] * x[2]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Level code as surrogate coordinates.
pub fn coords(code: [usize; 3]) -> [f64; 3] {
    code.map(|c| c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::three_mm3_design;

    fn design_points() -> Vec<[f64; 3]> {
        three_mm3_design().runs.into_iter().map(coords).collect()
    }

    #[test]
    fn constant_data_gives_constant_tail() {
        let s: Vec<_> = design_points().into_iter().map(|x| (x, 5.0)).collect();
        let m = fit_rbf(&s).unwrap();
        assert!((m.poly[0] - 5.0).abs() < 1e-9);
        assert!(m.poly[1..].iter().all(|c| c.abs() < 1e-9));
        assert!(m.weights.iter().all(|w| w.abs() < 1e-9));
    }

    #[test]
    fn affine_data_is_reproduced_everywhere() {
        let f = |x: &[f64; 3]| 1.5 - 0.5 * x[0] + 2.0 * x[1] + 0.25 * x[2];
        let s: Vec<_> = design_points().into_iter().map(|x| (x, f(&x))).collect();
        let m = fit_rbf(&s).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let x = coords([a, b, c]);
                    assert!((m.predict(&x) - f(&x)).abs() <= 1e-9 * f(&x).abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn interpolates_centers() {
        let s: Vec<_> = design_points()
            .into_iter()
            .map(|x| (x, (x[0] + 1.0).ln() * (x[1] + 2.0) + x[2].powi(2)))
            .collect();
        let m = fit_rbf(&s).unwrap();
        for (x, y) in &s {
            assert!((m.predict(x) - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
        let sum: f64 = m.weights.iter().sum();
        assert!(sum.abs() < 1e-9);
        for d in 0..3 {
            let moment: f64 = m.weights.iter().zip(&m.centers).map(|(w, c)| w * c[d]).sum();
            assert!(moment.abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_design_gives_symmetric_midpoint() {
        let s = vec![
            ([0.0, 0.0, 0.0], 1.0),
            ([2.0, 0.0, 0.0], 1.0),
            ([1.0, 1.0, 0.0], 3.0),
            ([1.0, -1.0, 0.0], 3.0),
            ([1.0, 0.0, 1.0], 2.0),
        ];
        let m = fit_rbf(&s).unwrap();
        let left = m.predict(&[0.5, 0.0, 0.5]);
        let right = m.predict(&[1.5, 0.0, 0.5]);
        assert!((left - right).abs() < 1e-9);
    }

    #[test]
    fn full_grid_reproduces_data() {
        let mut s = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let x = coords([a, b, c]);
                    s.push((x, (1.0 + x[0]) * (2.0 + x[1]).sqrt() / (1.0 + 0.3 * x[2])));
                }
            }
        }
        let m = fit_rbf(&s).unwrap();
        for (x, y) in &s {
            assert!((m.predict(x) - y).abs() < 1e-9 * y.abs());
        }
    }

    #[test]
    fn degenerate_points_are_singular() {
        let dup = vec![
            ([0.0; 3], 1.0),
            ([0.0; 3], 2.0),
            ([1.0, 0.0, 0.0], 1.0),
            ([0.0, 1.0, 0.0], 1.0),
            ([0.0, 0.0, 1.0], 1.0),
        ];
        assert!(matches!(fit_rbf(&dup), Err(Error::Singular(_))));
        let coplanar = vec![
            ([0.0, 0.0, 0.0], 1.0),
            ([1.0, 0.0, 0.0], 1.0),
            ([0.0, 1.0, 0.0], 1.0),
            ([1.0, 1.0, 0.0], 2.0),
        ];
        assert!(matches!(fit_rbf(&coplanar), Err(Error::Singular(_))));
        assert!(fit_rbf(&dup[..3]).is_err());
    }
}

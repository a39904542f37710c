//! Ridge regression on standardized columns with an unpenalized intercept.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RidgeModel {
    /// Coefficients in original feature units.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + self.coefficients.iter().zip(row.iter()).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// Fit by solving (ZᵀZ + λI)β = Zᵀ(y − ȳ) on zero-mean unit-variance
/// columns; the intercept absorbs the means and is not penalized. Constant
/// columns get zero coefficients.
pub fn ridge_fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<RidgeModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::EmptyInput(format!(
            "ridge needs matching non-empty x ({}) and y ({})",
            x.len(),
            y.len()
        )));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = x.len();
    let p = x[0].len();
    let nf = n as f64;

    let mut means = vec![0.0; p];
    for row in x {
        for (m, &v) in means.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= nf);

    let mut stds = vec![0.0; p];
    for row in x {
        for j in 0..p {
            let d = row[j] - means[j];
            stds[j] += d * d;
        }
    }
    for s in stds.iter_mut() {
        *s = (*s / nf).sqrt();
        if *s == 0.0 {
            *s = 1.0; // constant column standardizes to zeros
        }
    }

    let y_mean = y.iter().sum::<f64>() / nf;

    // Normal equations on the standardized design.
    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    let mut z_row = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y.iter()) {
        for j in 0..p {
            z_row[j] = (row[j] - means[j]) / stds[j];
        }
        let yc = yi - y_mean;
        for j in 0..p {
            aty[j] += z_row[j] * yc;
            for k in j..p {
                ata[j][k] += z_row[j] * z_row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            ata[j][k] = ata[k][j];
        }
        ata[j][j] += lambda;
    }

    let beta_std = solve_linear(ata, aty, lambda)?;

    // Back to original units.
    let coefficients: Vec<f64> = beta_std.iter().zip(stds.iter()).map(|(b, s)| b / s).collect();
    let intercept =
        y_mean - coefficients.iter().zip(means.iter()).map(|(c, m)| c * m).sum::<f64>();
    Ok(RidgeModel { coefficients, intercept, lambda })
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, lambda: f64) -> Result<Vec<f64>> {
    let p = b.len();
    for col in 0..p {
        let pivot_row = (col..p)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))
            .expect("non-empty range");
        if a[pivot_row][col].abs() < 1e-12 {
            return Err(Error::SingularSystem { lambda });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..p {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..p {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; p];
    for col in (0..p).rev() {
        let mut acc = b[col];
        for k in (col + 1)..p {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn recovers_exact_slope_without_penalty() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0]).collect();
        let model = ridge_fit(&x, &y, 0.0).unwrap();
        assert!((model.coefficients[0] - 2.0).abs() < 1e-10, "{model:?}");
        assert!(model.intercept.abs() < 1e-10);
    }

    #[test]
    fn huge_penalty_shrinks_to_mean() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| 3.0 * i as f64 + 1.0).collect();
        let y_mean = y.iter().sum::<f64>() / 40.0;
        let model = ridge_fit(&x, &y, 1e12).unwrap();
        for c in &model.coefficients {
            assert!(c.abs() < 1e-6, "{model:?}");
        }
        assert!((model.predict(&[7.0, 49.0]) - y_mean).abs() < 1e-3);
    }

    #[test]
    fn collinear_columns_without_penalty_are_singular() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(matches!(ridge_fit(&x, &y, 0.0), Err(Error::SingularSystem { .. })));
        // A positive penalty regularizes it.
        assert!(ridge_fit(&x, &y, 1.0).is_ok());
    }

    /// Independent oracle: build the same standardized normal equations and
    /// solve the 3×3 system by the adjugate (Cramer) formula.
    fn cramer_oracle(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
        let n = x.len() as f64;
        let p = 3usize;
        let mut means = vec![0.0; p];
        for row in x {
            for j in 0..p {
                means[j] += row[j] / n;
            }
        }
        let mut stds = vec![0.0; p];
        for row in x {
            for j in 0..p {
                stds[j] += (row[j] - means[j]).powi(2) / n;
            }
        }
        let stds: Vec<f64> = stds.iter().map(|v| v.sqrt()).collect();
        let ym = y.iter().sum::<f64>() / n;
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|row| (0..p).map(|j| (row[j] - means[j]) / stds[j]).collect())
            .collect();
        let mut a = [[0.0f64; 3]; 3];
        let mut b = [0.0f64; 3];
        for (zr, &yi) in z.iter().zip(y.iter()) {
            for j in 0..3 {
                b[j] += zr[j] * (yi - ym);
                for k in 0..3 {
                    a[j][k] += zr[j] * zr[k];
                }
            }
        }
        for (j, row) in a.iter_mut().enumerate() {
            row[j] += lambda;
        }
        let det = |m: &[[f64; 3]; 3]| -> f64 {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(&a);
        let mut beta = [0.0; 3];
        for j in 0..3 {
            let mut aj = a;
            for r in 0..3 {
                aj[r][j] = b[r];
            }
            beta[j] = det(&aj) / d;
        }
        // Back to original units.
        beta.iter().zip(stds.iter()).map(|(bv, s)| bv / s).collect()
    }

    #[test]
    fn random_system_matches_cramer_oracle() {
        let mut rng = crate::seed::rng_from_seed(23);
        let x: Vec<Vec<f64>> =
            (0..20).map(|_| (0..3).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 1.5 * r[0] - 0.7 * r[1] + 0.2 * r[2] + 0.1 * rng.gen::<f64>())
            .collect();
        let model = ridge_fit(&x, &y, 1.0).unwrap();
        let oracle = cramer_oracle(&x, &y, 1.0);
        for (got, want) in model.coefficients.iter().zip(oracle.iter()) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }
}

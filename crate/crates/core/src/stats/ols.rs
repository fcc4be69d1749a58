//! Ordinary least squares with classical (homoskedastic) inference.

use serde::Serialize;

use super::special::{t_quantile, t_two_sided_p};
use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * vr;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub term_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub n: usize,
    pub dof: usize,
    pub r_squared: f64,
    pub rss: f64,
    pub sigma2: f64,
    /// Zero residual variance: standard errors are zero and t/p are NaN.
    pub degenerate: bool,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn term_index(&self, name: &str) -> Option<usize> {
        self.term_names.iter().position(|t| t == name)
    }
}

/// Relative size below which a pivot of R marks a collinear column.
const RANK_TOLERANCE: f64 = 1e-10;

/// Householder QR of an n×k matrix, stored column-major.
struct Qr {
    n: usize,
    k: usize,
    /// Householder vectors below the diagonal, R on and above it.
    a: Vec<f64>,
    diag: Vec<f64>,
}

impl Qr {
    fn new(x: &Matrix) -> Result<Self> {
        let (n, k) = (x.rows(), x.cols());
        let mut a = vec![0.0; n * k];
        for c in 0..k {
            for r in 0..n {
                a[c * n + r] = x.get(r, c);
            }
        }
        let col_norms: Vec<f64> = (0..k)
            .map(|c| {
                a[c * n..(c + 1) * n]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let mut diag = vec![0.0; k];
        for j in 0..k {
            let norm = a[j * n + j..(j + 1) * n]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if col_norms[j] == 0.0 || norm <= RANK_TOLERANCE * col_norms[j] {
                return Err(Error::RankDeficient { column: j });
            }
            let alpha = if a[j * n + j] > 0.0 { -norm } else { norm };
            // v = x - alpha e1, normalized so that H = I - 2 v vᵀ / vᵀv
            a[j * n + j] -= alpha;
            let vtv: f64 = a[j * n + j..(j + 1) * n].iter().map(|v| v * v).sum();
            for c in j + 1..k {
                let dot: f64 = (j..n).map(|r| a[j * n + r] * a[c * n + r]).sum();
                let f = 2.0 * dot / vtv;
                for r in j..n {
                    a[c * n + r] -= f * a[j * n + r];
                }
            }
            diag[j] = alpha;
        }
        Ok(Qr { n, k, a, diag })
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else {
            self.a[j * self.n + i]
        }
    }

    /// Applies `Qᵀ` to `y`.
    fn qt_mul(&self, y: &mut [f64]) {
        let n = self.n;
        for j in 0..self.k {
            let v = &self.a[j * n + j..(j + 1) * n];
            let vtv: f64 = v.iter().map(|x| x * x).sum();
            let dot: f64 = v.iter().zip(&y[j..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vtv;
            for (yi, vi) in y[j..].iter_mut().zip(v) {
                *yi -= f * vi;
            }
        }
    }

    fn solve_upper(&self, rhs: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = rhs[i];
            for j in i + 1..k {
                s -= self.r(i, j) * out[j];
            }
            out[i] = s / self.r(i, i);
        }
        out
    }

    /// Diagonal of `(XᵀX)⁻¹ = R⁻¹ R⁻ᵀ`, i.e. squared row norms of `R⁻¹`.
    fn inverse_gram_diagonal(&self) -> Vec<f64> {
        let k = self.k;
        let mut rinv = vec![0.0; k * k];
        for col in 0..k {
            // solve R z = e_col
            for i in (0..=col).rev() {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for j in i + 1..=col {
                    s -= self.r(i, j) * rinv[j * k + col];
                }
                rinv[i * k + col] = s / self.r(i, i);
            }
        }
        (0..k)
            .map(|i| rinv[i * k..(i + 1) * k].iter().map(|v| v * v).sum())
            .collect()
    }
}

/// Fits `y ~ X` by least squares. Terms are named `x0, x1, ...`.
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<RegressionResult> {
    let names = (0..x.cols()).map(|i| format!("x{i}")).collect();
    ols_fit_named(x, y, names)
}

pub fn ols_fit_named(x: &Matrix, y: &[f64], term_names: Vec<String>) -> Result<RegressionResult> {
    let (n, k) = (x.rows(), x.cols());
    assert_eq!(y.len(), n, "response length must match design rows");
    assert_eq!(term_names.len(), k, "one name per design column");
    if k == 0 || n <= k {
        return Err(Error::TooFewObservations { n, k });
    }
    let qr = Qr::new(x)?;
    let mut qty = y.to_vec();
    qr.qt_mul(&mut qty);
    let coefficients = qr.solve_upper(&qty[..k]);

    let fitted = x.mul_vec(&coefficients);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let dof = n - k;
    let sigma2 = rss / dof as f64;

    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let degenerate = rss.sqrt() <= 1e-12 * y_norm.max(f64::MIN_POSITIVE);

    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r_squared = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else if degenerate {
        1.0
    } else {
        0.0
    };

    let gram_diag = qr.inverse_gram_diagonal();
    let (standard_errors, t_stats, p_values, ci_low, ci_high);
    if degenerate {
        standard_errors = vec![0.0; k];
        t_stats = vec![f64::NAN; k];
        p_values = vec![f64::NAN; k];
        ci_low = coefficients.clone();
        ci_high = coefficients.clone();
    } else {
        let crit = t_quantile(0.975, dof as f64);
        standard_errors = gram_diag
            .iter()
            .map(|g| (sigma2 * g).sqrt())
            .collect::<Vec<_>>();
        t_stats = coefficients
            .iter()
            .zip(&standard_errors)
            .map(|(b, se)| b / se)
            .collect::<Vec<_>>();
        p_values = t_stats
            .iter()
            .map(|&t| t_two_sided_p(t, dof as f64))
            .collect();
        ci_low = coefficients
            .iter()
            .zip(&standard_errors)
            .map(|(b, se)| b - crit * se)
            .collect();
        ci_high = coefficients
            .iter()
            .zip(&standard_errors)
            .map(|(b, se)| b + crit * se)
            .collect();
    }

    Ok(RegressionResult {
        term_names,
        coefficients,
        standard_errors,
        ci_low,
        ci_high,
        t_stats,
        p_values,
        n,
        dof,
        r_squared,
        rss,
        sigma2,
        degenerate,
        fitted,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_intercept(xs: &[f64]) -> Matrix {
        Matrix::from_rows(&xs.iter().map(|&x| vec![1.0, x]).collect::<Vec<_>>())
    }

    #[test]
    fn exact_line_is_degenerate() {
        let x = with_intercept(&[0.0, 1.0, 2.0]);
        let fit = ols_fit(&x, &[1.0, 3.0, 5.0]).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.rss < 1e-24);
        assert!(fit.degenerate);
        assert_eq!(fit.standard_errors, vec![0.0, 0.0]);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn duplicated_intercept_is_rank_deficient() {
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0, 0.3],
            vec![1.0, 1.0, 1.2],
            vec![1.0, 1.0, 2.5],
            vec![1.0, 1.0, 0.1],
        ]);
        let err = ols_fit(&x, &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { column: 1 }));

        let zero = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert!(matches!(
            ols_fit(&zero, &[1.0, 2.0, 3.0]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn too_few_observations() {
        let x = with_intercept(&[0.0, 1.0]);
        assert!(matches!(
            ols_fit(&x, &[1.0, 2.0]),
            Err(Error::TooFewObservations { n: 2, k: 2 })
        ));
    }

    #[test]
    fn simple_regression_by_hand() {
        // x = 1..5, y = (2, 4, 5, 4, 5): slope 0.6, intercept 2.2
        let x = with_intercept(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [2.0, 4.0, 5.0, 4.0, 5.0];
        let fit = ols_fit(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 2.2).abs() < 1e-12);
        assert!((fit.coefficients[1] - 0.6).abs() < 1e-12);
        // RSS = 2.4, s² = 0.8, Sxx = 10 → SE(slope) = sqrt(0.08)
        assert!((fit.rss - 2.4).abs() < 1e-12);
        assert!((fit.standard_errors[1] - 0.08f64.sqrt()).abs() < 1e-12);
        assert!((fit.r_squared - 0.6).abs() < 1e-12);
        assert_eq!(fit.dof, 3);
        assert!(fit.ci_low[1] < 0.6 && 0.6 < fit.ci_high[1]);
    }
}

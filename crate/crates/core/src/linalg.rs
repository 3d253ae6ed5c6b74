//! Small dense linear algebra on row-major `f64` buffers.

use alloc::vec;
use alloc::vec::Vec;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    /// Returns `None` when `data.len() != n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == n * n).then_some(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn add_diagonal(&mut self, delta: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += delta;
        }
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Largest absolute row sum; bounds every eigenvalue.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Solve `A x = b` for symmetric positive definite `A` by Cholesky.
    /// Returns `None` if a pivot is not positive.
    pub fn cholesky_solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[i * n + i] = libm::sqrt(s);
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= l[i * n + k] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= l[k * n + i] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        Some(y)
    }
}

/// Sample covariance matrix (`n - 1`) of equal-length series.
pub fn sample_covariance(series: &[&[f64]]) -> Matrix {
    let n = series.len();
    let t = series.first().map_or(0, |s| s.len());
    let means: Vec<f64> = series.iter().map(|s| s.iter().sum::<f64>() / t as f64).collect();
    let centred: Vec<Vec<f64>> = series
        .iter()
        .zip(&means)
        .map(|(s, m)| s.iter().map(|v| v - m).collect())
        .collect();
    let mut cov = Matrix::zeros(n);
    let denom = (t.max(2) - 1) as f64;
    for i in 0..n {
        for j in 0..=i {
            let c: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum::<f64>() / denom;
            cov.set(i, j, c);
            cov.set(j, i, c);
        }
    }
    cov
}

//! Small dense linear algebra for the total-relation kernel: LU with partial
//! pivoting, norms and products on row-major square matrices.

use crate::error::{Error, Result};

pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Maximum absolute row sum.
pub(crate) fn norm_inf(a: &[f64], n: usize) -> f64 {
    a.chunks(n)
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute column sum.
pub(crate) fn norm_1(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// PA = LU with unit lower-triangular L stored below the diagonal.
pub(crate) struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * n as f64 * f64::EPSILON;
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
                .expect("non-empty range");
            let pivot = a[pivot_row * n + col];
            // NaN fails this check too
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(pivot.abs() > tiny) {
                return Err(Error::Singular(format!(
                    "pivot {pivot:e} in column {} is numerically zero",
                    col + 1
                )));
            }
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            for r in (col + 1)..n {
                let factor = a[r * n + col] / pivot;
                a[r * n + col] = factor;
                if factor == 0.0 {
                    continue;
                }
                for j in (col + 1)..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
            }
        }
        Ok(Lu { n, lu: a, perm })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.lu[i * n + k] * x[k]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|k| self.lu[i * n + k] * x[k]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    pub(crate) fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

/// Whether the spectral radius of `a` is certifiably below one: some power
/// `a^(2^p)`, p ≤ 40, has infinity norm below one.
pub(crate) fn spectral_radius_below_one(a: &[f64], n: usize) -> bool {
    let mut power = a.to_vec();
    for _ in 0..=40 {
        let norm = norm_inf(&power, n);
        if norm < 1.0 {
            return true;
        }
        if !norm.is_finite() || norm > 1e150 {
            return false;
        }
        power = matmul(&power, &power, n);
    }
    false
}
